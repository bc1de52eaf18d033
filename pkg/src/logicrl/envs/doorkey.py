"""DoorKey: unlock every door with color-matched keys, then reach the goal.

Colored keys are scattered in a room with one or more locked colored doors.
The agent carries at most one key: picking a new key drops the current one,
and opening a door consumes the key it was unlocked with (it stays in the
lock), so the agent is free to fetch the next key.  `goto` on the goal
succeeds once no locked door remains; success is worth 1, everything else 0.

Colors never appear as constants; they only induce the symmetric
`samecolor` relation between objects.
"""

from __future__ import annotations

import itertools

from ..logic import Alphabet, Atom
from .base import RelationalEnv, StepOutcome, as_generator

COLOR_POOL = ("red", "green", "blue", "yellow", "purple", "orange")
GOAL_OBJECT = "gob"


class DoorKeyEnv(RelationalEnv):
    name = "doorkey"
    constraints_preset = "doorkey"
    default_rules_per_schema = {"pick": 1, "open": 1, "goto": 1}

    def __init__(
        self,
        n_keys: int = 2,
        n_doors: int = 1,
        colors: tuple[str, ...] = COLOR_POOL,
        horizon: int = 20,
        seed=0,
    ):
        if n_doors < 1:
            raise ValueError("need at least one door")
        if n_keys < n_doors:
            raise ValueError("unsolvable: fewer keys than doors")
        if len(colors) < n_doors:
            raise ValueError("not enough colors for distinct door colors")
        self.n_keys = n_keys
        self.n_doors = n_doors
        self.colors = tuple(colors)
        self.keys = tuple(f"k{i + 1}" for i in range(n_keys))
        self.doors = tuple(f"d{i + 1}" for i in range(n_doors))
        alphabet = Alphabet(
            target_predicates=[("pick", 1), ("open", 1), ("goto", 1)],
            extensional_predicates=[
                ("key", 1), ("door", 1), ("locked", 1), ("carrying", 1),
                ("goal", 1), ("samecolor", 2), ("notcarrying", 0), ("unlocked", 0),
            ],
            constants=self.keys + self.doors + (GOAL_OBJECT,),
            variables=["X", "Y"],
        )
        super().__init__(alphabet, horizon, as_generator(seed))
        self.color_of: dict[str, str] = {}
        self.room: set[str] = set()
        self.carried: str | None = None
        self.locked: set[str] = set()

    def _assign_colors(self) -> None:
        door_colors = [self.colors[int(i)] for i in
                       self.rng.choice(len(self.colors), size=self.n_doors, replace=False)]
        matched = list(self.rng.permutation(list(self.keys))[: self.n_doors])
        self.color_of = dict(zip(self.doors, door_colors))
        for key, door in zip(matched, self.doors):
            self.color_of[key] = self.color_of[door]
        for key in self.keys:
            if key not in self.color_of:
                self.color_of[key] = self.colors[int(self.rng.integers(len(self.colors)))]

    def _reset(self) -> frozenset[Atom]:
        self._assign_colors()
        self.room = set(self.keys)
        self.carried = None
        self.locked = set(self.doors)
        ab = self.alphabet
        objects = self.keys + self.doors
        same = {
            ab.atom("samecolor", a, b)
            for a, b in itertools.permutations(objects, 2)
            if self.color_of[a] == self.color_of[b]
        }
        self.background = frozenset(
            {ab.atom("goal", GOAL_OBJECT)}
            | {ab.atom("door", d) for d in self.doors}
            | same
        )
        return self._state_atoms()

    def _state_atoms(self) -> frozenset[Atom]:
        ab = self.alphabet
        existing = self.room | ({self.carried} if self.carried else set())
        atoms = {ab.atom("key", k) for k in existing}
        atoms |= {ab.atom("locked", d) for d in self.locked}
        if not self.locked:
            atoms.add(ab.atom("unlocked"))
        if self.carried:
            atoms.add(ab.atom("carrying", self.carried))
        else:
            atoms.add(ab.atom("notcarrying"))
        return frozenset(atoms)

    def ground_actions(self) -> tuple[Atom, ...]:
        ab = self.alphabet
        actions = [ab.atom("pick", k) for k in sorted(self.room)]
        actions += [ab.atom("open", d) for d in sorted(self.locked)]
        actions.append(ab.atom("goto", GOAL_OBJECT))
        return tuple(sorted(actions, key=str))

    def _step(self, action: Atom) -> StepOutcome:
        op = action.predicate.name
        arg = action.args[0].name
        if op == "pick":
            if self.carried:
                self.room.add(self.carried)
            self.room.discard(arg)
            self.carried = arg
        elif op == "open":
            if self.carried and self.color_of[self.carried] == self.color_of[arg]:
                self.locked.discard(arg)
                self.carried = None  # the key stays in the lock
        elif op == "goto":
            if not self.locked:
                return StepOutcome(self._state_atoms(), 1.0, True)
        return StepOutcome(self._state_atoms(), 0.0, False)
