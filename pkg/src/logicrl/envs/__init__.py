"""Environment registry and generalization variants.

`make(name, seed=..., **config)` builds a training environment;
`make_variant(name, variant, seed=...)` reconfigures it for a generalization
test.  Variants change constants, layouts, or episode structure but never
the variable-atom space, so trained rule vectors apply unchanged.
"""

from __future__ import annotations

import string

from ..logic import VocabularyError
from .base import RelationalEnv, StepOutcome
from .blocks import HELD_OUT_CONFIGS, TRAIN_CONFIGS, BlocksWorldEnv
from .countdown import CountdownEnv
from .doorkey import DoorKeyEnv
from .grid import GridworldEnv
from .traffic import TrafficNetwork

ENV_NAMES = ("countdown", "blocksworld", "gridworld", "doorkey", "traffic")

VARIANT_KEYS = {
    "countdown": ("dynamic-stack", "held-out-target", "held-out-initial", "stochastic"),
    "blocksworld": ("held-out-config", "dynamic-blocks", "dynamic-stacks", "unseen-goal"),
    "gridworld": ("dynamic-obstacles", "held-out-config"),
    "doorkey": ("dynamic-keys-doors",),
    "traffic": ("agents",),
}


def make(name: str, seed=0, **config):
    if name == "countdown":
        return CountdownEnv(seed=seed, **config)
    if name == "blocksworld":
        return BlocksWorldEnv(seed=seed, **config)
    if name == "gridworld":
        return GridworldEnv(seed=seed, **config)
    if name == "doorkey":
        return DoorKeyEnv(seed=seed, **config)
    if name == "traffic":
        return TrafficNetwork(seed=seed, **config)
    raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}")


def _parse_goal(text: str) -> tuple[str, str]:
    text = text.strip()
    if not text.startswith("goal_on(") or not text.endswith(")"):
        raise ValueError(f"expected goal_on(x,y), got {text!r}")
    a, b = (p.strip() for p in text[len("goal_on("):-1].split(","))
    return a, b


def make_variant(name: str, variant: str, seed=0, **config):
    """Build the environment named by a variant key like ``dynamic-stack=4``."""
    key, _, value = variant.partition("=")
    known = VARIANT_KEYS.get(name, ())
    if key not in known:
        raise ValueError(f"unknown variant {key!r} for {name}; choose from {known}")

    if name == "countdown":
        if key == "dynamic-stack":
            return make(name, seed=seed, stack_len=int(value), **config)
        if key == "held-out-target":
            return make(name, seed=seed, targets="held-out", **config)
        if key == "held-out-initial":
            return make(name, seed=seed, initials="held-out", **config)
        if key == "stochastic":
            return make(name, seed=seed, stochastic=True, **config)

    if name == "blocksworld":
        if key == "held-out-config":
            return make(name, seed=seed, configs=HELD_OUT_CONFIGS, **config)
        if key == "dynamic-blocks":
            n = int(value)
            blocks = tuple(string.ascii_lowercase[:n])
            return make(name, seed=seed, blocks=blocks, configs=None, **config)
        if key == "dynamic-stacks":
            n = int(value)
            blocks = tuple(string.ascii_lowercase[: max(3, n + 1)])
            return make(name, seed=seed, blocks=blocks, configs=None, n_stacks=n, **config)
        if key == "unseen-goal":
            goal = _parse_goal(value)
            configs = tuple(
                c for c in TRAIN_CONFIGS
                if not any((above, below) == goal
                           for stack in c for below, above in zip(stack, stack[1:]))
            ) or None
            return make(name, seed=seed, goal=goal, configs=configs, **config)

    if name == "gridworld":
        if key == "dynamic-obstacles":
            return make(name, seed=seed, n_obstacles=int(value), **config)
        if key == "held-out-config":
            return make(name, seed=seed, configs="held-out", **config)

    if name == "doorkey":
        if key == "dynamic-keys-doors":
            keys, doors = (int(p) for p in value.split(",")) if value else (3, 2)
            return make(name, seed=seed, n_keys=keys, n_doors=doors, **config)

    if name == "traffic":
        if key == "agents":
            return make(name, seed=seed, n_agents=int(value), **config)

    raise ValueError(f"variant {variant!r} not handled for {name}")


__all__ = [
    "ENV_NAMES",
    "VARIANT_KEYS",
    "RelationalEnv",
    "StepOutcome",
    "CountdownEnv",
    "BlocksWorldEnv",
    "GridworldEnv",
    "DoorKeyEnv",
    "TrafficNetwork",
    "TRAIN_CONFIGS",
    "HELD_OUT_CONFIGS",
    "make",
    "make_variant",
]
