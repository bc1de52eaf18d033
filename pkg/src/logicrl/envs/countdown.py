"""The countdown game.

A stack of numbers is consumed one element per step; each step either adds
the top to the accumulator, subtracts it, or leaves the accumulator alone.
The episode ends when the stack is empty, rewarding 1 if the accumulator
matches the goal and a normalized negative distance otherwise.  Background
knowledge carries the goal (it never changes within an episode) and the
order facts anchored on it: how every representable number compares to the
target.

The stack itself is a fixed sequence the episode walks through: the chain
and bottom facts describe the whole sequence throughout, and only the top
marker and the accumulator change as operations consume items.

Episodes are generated so that the one-step-lookahead policy (add below the
goal, subtract above it, otherwise pass) can reach the goal exactly; targets
produced by arbitrary operation sequences are frequently unreachable for any
policy without lookahead, which would put the optimum well below 1.
"""

from __future__ import annotations

import itertools

from ..logic import Alphabet, Atom
from .base import RelationalEnv, StepOutcome, as_generator, stable_split

TRAIN = "train"
HELD_OUT = "held-out"
ALL = "all"


class CountdownEnv(RelationalEnv):
    name = "countdown"
    constraints_preset = "countdown"
    default_rules_per_schema = {"add": 1, "sub": 1, "null": 1}

    def __init__(
        self,
        lo: int = -4,
        hi: int = 6,
        stack_len: int = 2,
        stochastic: bool = False,
        null_prob: float = 0.1,
        targets: str = TRAIN,
        initials: str = TRAIN,
        held_out_targets: tuple[int, ...] = (-3, 1, 5),
        seed=0,
    ):
        if hi <= lo:
            raise ValueError("empty number range")
        if stack_len < 1:
            raise ValueError("stack length must be at least 1")
        self.lo, self.hi = lo, hi
        self.stack_len = stack_len
        self.stochastic = stochastic
        self.null_prob = null_prob
        self.targets = targets
        self.initials = initials
        self.held_out_targets = frozenset(held_out_targets)

        max_abs = max(abs(lo), abs(hi))
        self.range_lo = lo - stack_len * max_abs
        self.range_hi = hi + stack_len * max_abs
        # miss penalty scale: the declared number range, not the wider
        # reachable accumulator range the constants must cover
        self.normalizer = hi - lo
        numbers = range(self.range_lo, self.range_hi + 1)
        alphabet = Alphabet(
            target_predicates=[("add", 0), ("sub", 0), ("null", 0)],
            extensional_predicates=[
                ("curr", 1), ("next", 2), ("last", 1), ("acc", 1), ("goal", 1), ("less", 2),
            ],
            constants=[str(n) for n in numbers],
            variables=["X", "Y"],
        )
        super().__init__(alphabet, horizon=stack_len, rng=as_generator(seed))
        self._actions = tuple(sorted(
            (Atom(p) for p in alphabet.targets), key=str
        ))
        self.seq: list[int] = []
        self.pos = 0
        self.acc = 0
        self.goal = 0

    @property
    def stack(self) -> list[int]:
        """Numbers still to be consumed, top first."""
        return self.seq[self.pos:]

    @stack.setter
    def stack(self, items) -> None:
        self.seq = list(items)
        self.pos = 0

    def _order_facts(self, goal: int) -> set[Atom]:
        """Order facts anchored on the target: how every number compares to it."""
        ab = self.alphabet
        facts = set()
        for n in range(self.range_lo, self.range_hi + 1):
            if n < goal:
                facts.add(ab.atom("less", str(n), str(goal)))
            elif n > goal:
                facts.add(ab.atom("less", str(goal), str(n)))
        return facts

    # -- episode generation -------------------------------------------------

    def _outcomes(self, stack, acc) -> set[int]:
        finals = {acc}
        for top in stack:
            finals = {f + d for f in finals for d in (top, -top, 0)}
        return finals

    def _greedy_final(self, stack, acc, goal) -> int:
        for top in stack:
            if acc < goal:
                acc += top
            elif acc > goal:
                acc -= top
        return acc

    def _sample_episode(self):
        for _ in range(1000):
            stack = [int(self.rng.integers(self.lo, self.hi + 1)) for _ in range(self.stack_len)]
            acc = int(self.rng.integers(self.lo, self.hi + 1))
            held = stable_split(f"{stack}|{acc}")
            if self.initials == TRAIN and held:
                continue
            if self.initials == HELD_OUT and not held:
                continue
            # targets equal to the starting accumulator make the whole episode
            # a no-op; requiring at least one effective operation keeps the
            # reward signal attached to the operators
            goals = sorted(
                g for g in self._outcomes(stack, acc)
                if g != acc and self._greedy_final(stack, acc, g) == g
            )
            if self.targets == TRAIN:
                goals = [g for g in goals if g not in self.held_out_targets]
            elif self.targets == HELD_OUT:
                goals = [g for g in goals if g in self.held_out_targets]
            if not goals:
                continue
            goal = goals[int(self.rng.integers(len(goals)))]
            return stack, acc, goal
        raise RuntimeError("could not sample a countdown episode under the configured split")

    # -- environment interface ----------------------------------------------

    def _reset(self) -> frozenset[Atom]:
        self.stack, self.acc, self.goal = self._sample_episode()
        self.background = frozenset(
            self._order_facts(self.goal) | {self.alphabet.atom("goal", str(self.goal))}
        )
        return self._state_atoms()

    def _state_atoms(self) -> frozenset[Atom]:
        ab = self.alphabet
        atoms = {ab.atom("acc", str(self.acc))}
        if self.seq:
            atoms.add(ab.atom("last", str(self.seq[-1])))
            for above, below in zip(self.seq, self.seq[1:]):
                atoms.add(ab.atom("next", str(above), str(below)))
        if self.stack:
            atoms.add(ab.atom("curr", str(self.stack[0])))
        return frozenset(atoms)

    def ground_actions(self) -> tuple[Atom, ...]:
        return self._actions

    def _step(self, action: Atom) -> StepOutcome:
        op = action.predicate.name
        if self.stochastic and self.rng.random() < self.null_prob:
            op = "null"
        top = self.seq[self.pos]
        self.pos += 1
        if op == "add":
            self.acc += top
        elif op == "sub":
            self.acc -= top
        if self.stack:
            return StepOutcome(self._state_atoms(), 0.0, False)
        if self.acc == self.goal:
            reward = 1.0
        else:
            reward = max(-1.0, -abs(self.goal - self.acc) / self.normalizer)
        return StepOutcome(self._state_atoms(), reward, True)
