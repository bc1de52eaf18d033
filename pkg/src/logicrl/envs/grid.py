"""Gridworld navigation with obstacles.

The agent sees its coordinates and the compass octant of the target; target,
obstacle, and coordinate-successor facts are background.  Moves into walls or
obstacles leave the position unchanged.  Reaching the target ends the
episode with reward 1; running out the horizon ends it with the negative
distance to the target over the grid diagonal.  An optional dense mode
charges that normalized distance every step instead.

Layouts are re-sampled every episode (always solvable); the held-out split
is a fixed hash bucket of the (agent, target) placement.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..logic import Alphabet, Atom
from .base import RelationalEnv, StepOutcome, as_generator, stable_split

COMPASS = ("north", "south", "east", "west",
           "northeast", "northwest", "southeast", "southwest")
MOVES = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}

TRAIN = "train"
HELD_OUT = "held-out"
ALL = "all"


class GridworldEnv(RelationalEnv):
    name = "gridworld"
    constraints_preset = "gridworld"
    default_rules_per_schema = {a: 2 for a in MOVES}

    def __init__(
        self,
        size: int = 5,
        n_obstacles: int = 2,
        configs: str = TRAIN,
        horizon: int | None = None,
        dense_penalty: bool = False,
        seed=0,
    ):
        if size < 2:
            raise ValueError("grid size must be at least 2")
        if n_obstacles > size * size - 2:
            raise ValueError("too many obstacles for the grid")
        self.size = size
        self.n_obstacles = n_obstacles
        self.configs = configs
        self.dense_penalty = dense_penalty
        self.diagonal = float(np.hypot(size - 1, size - 1))
        alphabet = Alphabet(
            target_predicates=[(a, 0) for a in MOVES],
            extensional_predicates=[("curr", 2), ("target", 2), ("obs", 2), ("succ", 2)]
            + [(c, 0) for c in COMPASS],
            constants=[str(i) for i in range(size)],
            variables=["X", "Y", "Z"],
        )
        super().__init__(alphabet, horizon or 4 * size, as_generator(seed))
        self._actions = tuple(sorted((Atom(p) for p in alphabet.targets), key=str))
        self._succ = frozenset(
            alphabet.atom("succ", str(i), str(i + 1)) for i in range(size - 1)
        )
        self.pos = (0, 0)
        self.target = (0, 0)
        self.obstacles: frozenset[tuple[int, int]] = frozenset()

    def _solvable(self, start, target, obstacles) -> bool:
        seen, queue = {start}, deque([start])
        while queue:
            x, y = queue.popleft()
            if (x, y) == target:
                return True
            for dx, dy in MOVES.values():
                nxt = (x + dx, y + dy)
                if (0 <= nxt[0] < self.size and 0 <= nxt[1] < self.size
                        and nxt not in obstacles and nxt not in seen):
                    seen.add(nxt)
                    queue.append(nxt)
        return False

    def _reset(self) -> frozenset[Atom]:
        cells = [(x, y) for x in range(self.size) for y in range(self.size)]
        for _ in range(1000):
            picks = self.rng.choice(len(cells), size=2 + self.n_obstacles, replace=False)
            agent, target, *obs = (cells[i] for i in picks)
            held = stable_split(f"{agent}|{target}")
            if self.configs == TRAIN and held:
                continue
            if self.configs == HELD_OUT and not held:
                continue
            if not self._solvable(agent, target, set(obs)):
                continue
            self.pos, self.target, self.obstacles = agent, target, frozenset(obs)
            ab = self.alphabet
            self.background = (
                {ab.atom("target", str(target[0]), str(target[1]))}
                | {ab.atom("obs", str(x), str(y)) for x, y in self.obstacles}
                | self._succ
            )
            self.background = frozenset(self.background)
            return self._state_atoms()
        raise RuntimeError("could not sample a solvable grid layout under the configured split")

    def _compass(self) -> str | None:
        dx = self.target[0] - self.pos[0]
        dy = self.target[1] - self.pos[1]
        if dx == 0 and dy == 0:
            return None
        ns = "north" if dy > 0 else "south" if dy < 0 else ""
        ew = "east" if dx > 0 else "west" if dx < 0 else ""
        return (ns + ew) if (ns and ew) else (ns or ew)

    def _state_atoms(self) -> frozenset[Atom]:
        ab = self.alphabet
        atoms = {ab.atom("curr", str(self.pos[0]), str(self.pos[1]))}
        compass = self._compass()
        if compass:
            atoms.add(ab.atom(compass))
        return frozenset(atoms)

    def ground_actions(self) -> tuple[Atom, ...]:
        return self._actions

    def _distance(self, pos) -> float:
        return float(np.hypot(self.target[0] - pos[0], self.target[1] - pos[1]))

    def _step(self, action: Atom) -> StepOutcome:
        dx, dy = MOVES[action.predicate.name]
        nxt = (self.pos[0] + dx, self.pos[1] + dy)
        blocked = not (0 <= nxt[0] < self.size and 0 <= nxt[1] < self.size) or nxt in self.obstacles
        before = self.pos
        if not blocked:
            self.pos = nxt
        if self.pos == self.target:
            return StepOutcome(self._state_atoms(), 1.0, True)
        reward = -self._distance(before) / self.diagonal if self.dense_penalty else 0.0
        return StepOutcome(self._state_atoms(), reward, False)

    def _truncate(self, outcome: StepOutcome) -> StepOutcome:
        reward = outcome.reward
        if not self.dense_penalty:
            reward = -self._distance(self.pos) / self.diagonal
        return StepOutcome(outcome.next_state, reward, True)
