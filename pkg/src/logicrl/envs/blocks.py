"""Blocks world manipulation.

Stacks of named blocks sit on a floor; `move(X,Y)` detaches a top block X
and places it on another top block or on the floor.  The task is to make a
configured `goal_on` pair hold.  Each action costs 0.02 so shorter plans
score higher; achieving the goal ends the episode with reward 1 on top of
that step's penalty.

Moves of non-top blocks, and moves of a lone floor block back to the floor,
are absent from the ground action set rather than failing as no-ops.
"""

from __future__ import annotations

from ..logic import Alphabet, Atom
from .base import RelationalEnv, StepOutcome, as_generator

Stacks = tuple[tuple[str, ...], ...]

TRAIN_CONFIGS: tuple[Stacks, ...] = (
    (("a", "b", "c"),),
    (("c", "a", "b"),),
    (("a", "c"), ("b",)),
    (("b", "c"), ("a",)),
)
HELD_OUT_CONFIGS: tuple[Stacks, ...] = (
    (("a", "b"), ("c",)),
    (("b", "c", "a"),),
    (("b", "a", "c"),),
)

FLOOR = "floor"


class BlocksWorldEnv(RelationalEnv):
    name = "blocksworld"
    constraints_preset = "blocksworld"
    default_rules_per_schema = {"move": 2}

    def __init__(
        self,
        blocks: tuple[str, ...] = ("a", "b", "c"),
        goal: tuple[str, str] = ("a", "b"),
        configs=TRAIN_CONFIGS,
        n_stacks: int | None = None,
        horizon: int | None = None,
        seed=0,
    ):
        self.blocks = tuple(sorted(blocks))
        if goal[0] not in self.blocks or goal[1] not in self.blocks or goal[0] == goal[1]:
            raise ValueError(f"goal {goal} is not a pair of distinct blocks")
        self.goal = goal
        self.n_stacks = n_stacks
        if configs is not None:
            configs = tuple(c for c in configs if not self._satisfies_goal(c))
            if not configs:
                raise ValueError("every initial configuration already satisfies the goal")
        self.configs = configs
        alphabet = Alphabet(
            target_predicates=[("move", 2)],
            extensional_predicates=[("top", 1), ("on", 2), ("goal_on", 2), ("isFloor", 1)],
            constants=self.blocks + (FLOOR,),
            variables=["X", "Y", "Z"],
        )
        super().__init__(
            alphabet,
            horizon=horizon if horizon is not None else 4 + 2 * len(self.blocks),
            rng=as_generator(seed),
        )
        self.background = frozenset({
            alphabet.atom("isFloor", FLOOR),
            alphabet.atom("goal_on", *goal),
        })
        self.stacks: list[list[str]] = []

    def _satisfies_goal(self, stacks: Stacks) -> bool:
        for stack in stacks:
            for below, above in zip(stack, stack[1:]):
                if (above, below) == self.goal:
                    return True
        return False

    def _validate(self, stacks: Stacks) -> None:
        placed = [b for stack in stacks for b in stack]
        if sorted(placed) != sorted(self.blocks):
            raise ValueError(f"configuration {stacks} does not place each block exactly once")
        if any(not stack for stack in stacks):
            raise ValueError("empty stack in configuration")

    def _random_config(self) -> Stacks:
        for _ in range(1000):
            order = list(self.rng.permutation(list(self.blocks)))
            k = self.n_stacks or int(self.rng.integers(1, len(self.blocks) + 1))
            if k > len(self.blocks):
                continue
            cuts = sorted(self.rng.choice(range(1, len(order)), size=k - 1, replace=False)) if k > 1 else []
            stacks = tuple(
                tuple(order[i:j]) for i, j in zip([0] + list(cuts), list(cuts) + [len(order)])
            )
            if not self._satisfies_goal(stacks):
                return stacks
        raise RuntimeError("could not sample a blocks configuration missing the goal")

    def _reset(self) -> frozenset[Atom]:
        if self.configs is not None:
            config = self.configs[int(self.rng.integers(len(self.configs)))]
        else:
            config = self._random_config()
        self._validate(config)
        self.stacks = [list(s) for s in config]
        return self._state_atoms()

    def _state_atoms(self) -> frozenset[Atom]:
        ab = self.alphabet
        atoms = set()
        for stack in self.stacks:
            atoms.add(ab.atom("top", stack[-1]))
            atoms.add(ab.atom("on", stack[0], FLOOR))
            for below, above in zip(stack, stack[1:]):
                atoms.add(ab.atom("on", above, below))
        return frozenset(atoms)

    def ground_actions(self) -> tuple[Atom, ...]:
        ab = self.alphabet
        tops = [stack[-1] for stack in self.stacks]
        actions = []
        for x in tops:
            for y in tops:
                if x != y:
                    actions.append(ab.atom("move", x, y))
            lone = any(stack == [x] for stack in self.stacks)
            if not lone:
                actions.append(ab.atom("move", x, FLOOR))
        return tuple(sorted(actions, key=str))

    def _step(self, action: Atom) -> StepOutcome:
        x, y = (t.name for t in action.args)
        src = next(s for s in self.stacks if s[-1] == x)
        src.pop()
        self.stacks = [s for s in self.stacks if s]
        if y == FLOOR:
            self.stacks.append([x])
        else:
            next(s for s in self.stacks if s[-1] == y).append(x)
        reward = -0.02
        done = self._satisfies_goal(tuple(tuple(s) for s in self.stacks))
        if done:
            reward += 1.0
        return StepOutcome(self._state_atoms(), reward, done)
