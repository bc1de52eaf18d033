"""Common shape of the relational environments.

States, background knowledge, and actions are all sets of ground atoms over
the environment's alphabet.  The background is fixed within an episode; the
per-state ground action set is supplied by the environment each step.
Transition and reward functions stay internal to the environment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..logic import Alphabet, Atom


@dataclass(frozen=True)
class StepOutcome:
    next_state: frozenset[Atom]
    reward: float
    done: bool


class RelationalEnv:
    """Base class: subclasses implement _reset and _step."""

    name: str = "env"
    constraints_preset: str | None = None
    default_rules_per_schema: dict[str, int] = {}

    def __init__(self, alphabet: Alphabet, horizon: int, rng: np.random.Generator):
        if horizon < 1:
            raise ValueError("horizon must be positive")
        self.alphabet = alphabet
        self.horizon = horizon
        self.rng = rng
        self.background: frozenset[Atom] = frozenset()
        self.state: frozenset[Atom] = frozenset()
        self._t = 0
        self._done = True

    def reset(self) -> frozenset[Atom]:
        self._t = 0
        self._done = False
        self.state = self._reset()
        return self.state

    def step(self, action: Atom) -> StepOutcome:
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        if action not in self.ground_actions():
            raise ValueError(f"action {action} is not available in the current state")
        outcome = self._step(action)
        self._t += 1
        if not outcome.done and self._t >= self.horizon:
            outcome = self._truncate(outcome)
        self.state = outcome.next_state
        self._done = outcome.done
        return outcome

    def ground_actions(self) -> tuple[Atom, ...]:
        raise NotImplementedError

    def _reset(self) -> frozenset[Atom]:
        raise NotImplementedError

    def _step(self, action: Atom) -> StepOutcome:
        raise NotImplementedError

    def _truncate(self, outcome: StepOutcome) -> StepOutcome:
        """Horizon reached without a terminal transition."""
        return StepOutcome(outcome.next_state, outcome.reward, True)

    @property
    def steps_taken(self) -> int:
        return self._t


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def stable_split(key: str, held_out_share: int = 5) -> bool:
    """Deterministic membership in the held-out pool (about 1/share)."""
    import zlib

    return zlib.crc32(key.encode()) % held_out_share == 0
