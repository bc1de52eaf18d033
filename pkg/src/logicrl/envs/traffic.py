"""Traffic-lite: a discrete-time queue network over an intersection graph.

Each intersection is an agent controlling the lights of its incident two-way
lanes.  Per step every agent picks one lane to turn green, draining up to a
fixed number of vehicles from its queue for that lane, after which Poisson
arrivals land on every queue.  An agent observes only which of its lanes
currently has the longest queue; the lane topology and the intersection
markers are background knowledge.  Per-agent reward is the negative total
queue at that intersection over a normalizer.

Agents act simultaneously through `advance`; the per-agent environment views
share this network and are intended to be stepped in lockstep by a
coordinating trainer.  The 5-agent graph is a hub with four rim
intersections (one 4-way, four 3-way); the 8-agent graph is a twisted cube
with two extra diagonals (four 3-way, four 4-way).
"""

from __future__ import annotations

import itertools

import numpy as np

from ..logic import Alphabet, Atom
from .base import as_generator

TOPOLOGIES: dict[int, tuple[tuple[int, int], ...]] = {
    5: ((0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (4, 1)),
    8: (
        (0, 1), (1, 2), (2, 3), (3, 0),
        (4, 5), (5, 6), (6, 7), (7, 4),
        (0, 4), (1, 5), (2, 6), (3, 7),
        (0, 5), (2, 7),
    ),
}


class TrafficNetwork:
    name = "traffic"
    constraints_preset = "traffic"
    default_rules_per_schema = {"green": 1}

    def __init__(
        self,
        n_agents: int = 5,
        arrival_rate: float = 0.4,
        drain: int = 3,
        horizon: int = 30,
        normalizer: float = 10.0,
        seed=0,
    ):
        try:
            edges = TOPOLOGIES[n_agents]
        except KeyError:
            raise ValueError(f"no {n_agents}-agent topology; choose from {sorted(TOPOLOGIES)}")
        self.n_agents = n_agents
        self.arrival_rate = arrival_rate
        self.drain = drain
        self.horizon = horizon
        self.normalizer = normalizer
        self.rng = as_generator(seed)

        self.intersections = tuple(f"i{k}" for k in range(n_agents))
        self.lanes = tuple(f"l{chr(ord('a') + k)}" for k in range(len(edges)))
        self.endpoints = {
            lane: (self.intersections[u], self.intersections[v])
            for lane, (u, v) in zip(self.lanes, edges)
        }
        self.incident = {
            agent: tuple(sorted(l for l, (u, v) in self.endpoints.items() if agent in (u, v)))
            for agent in self.intersections
        }
        degrees = {len(ls) for ls in self.incident.values()}
        if not degrees <= {3, 4}:
            raise ValueError(f"intersections must be 3- or 4-way, got degrees {sorted(degrees)}")

        self.alphabet = Alphabet(
            target_predicates=[("green", 1)],
            extensional_predicates=[("highest", 1), ("intersection", 1), ("between", 3)],
            constants=self.lanes + self.intersections,
            variables=["X", "Y", "Z"],
        )
        ab = self.alphabet
        self.background = frozenset(
            {ab.atom("intersection", i) for i in self.intersections}
            | {ab.atom("between", l, u, v) for l, (u, v) in self.endpoints.items()}
            | {ab.atom("between", l, v, u) for l, (u, v) in self.endpoints.items()}
        )
        self.queues: dict[str, dict[str, int]] = {}
        self.t = 0

    def degree(self, agent: str) -> int:
        return len(self.incident[agent])

    def reset(self) -> None:
        self.t = 0
        self.queues = {a: {l: 0 for l in self.incident[a]} for a in self.intersections}
        # Warm start so the first observation is informative.
        for _ in range(3):
            self._arrivals()

    def _arrivals(self) -> None:
        for agent in self.intersections:
            for lane in self.incident[agent]:
                self.queues[agent][lane] += int(self.rng.poisson(self.arrival_rate))

    def agent_state(self, agent: str) -> frozenset[Atom]:
        q = self.queues[agent]
        best = max(sorted(q), key=lambda l: q[l])
        return frozenset({self.alphabet.atom("highest", best)})

    def agent_actions(self, agent: str) -> tuple[Atom, ...]:
        return tuple(self.alphabet.atom("green", l) for l in self.incident[agent])

    def advance(self, choices: dict[str, Atom]) -> tuple[dict[str, float], bool]:
        """Apply one synchronized step; returns per-agent rewards and done."""
        if sorted(choices) != sorted(self.intersections):
            raise ValueError("every agent must choose a lane each step")
        for agent, action in choices.items():
            lane = action.args[0].name
            if lane not in self.incident[agent]:
                raise ValueError(f"lane {lane} is not incident to {agent}")
            self.queues[agent][lane] = max(0, self.queues[agent][lane] - self.drain)
        self._arrivals()
        rewards = {
            agent: -sum(self.queues[agent].values()) / self.normalizer
            for agent in self.intersections
        }
        self.t += 1
        return rewards, self.t >= self.horizon
