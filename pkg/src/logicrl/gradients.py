"""Exact gradients of the per-step log-policy and of the semantic loss.

The forward computation has the same shape every step, so instead of a
general expression graph the tape stores just enough per step to replay the
chain rule: the sampled bodies with their weights, each action's winning rule
slot with the truth row behind its valuation, and the softmax output.

Gradients are taken with respect to the rule-model logits while holding the
sampled rule vectors fixed; the discrete sampling contributes exploration
only.  Max nodes (over substitutions and over rule slots) propagate through
the recorded argmax branch, and a valuation clamped at zero propagates
nothing.  Atoms outside a sampled body receive no policy gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass
class SlotSample:
    """One sampled rule: selected atom indices and their weights."""

    body: np.ndarray
    w: np.ndarray


@dataclass
class StepRecord:
    probs: np.ndarray
    chosen: int
    action_schemas: tuple[str, ...]
    action_slots: tuple[int, ...]
    action_truth_rows: tuple  # per action: winning truth row, or None if clamped
    slot_samples: Mapping[str, Sequence[SlotSample]]


@dataclass
class GradientTape:
    steps: list[StepRecord] = field(default_factory=list)

    def record(self, step: StepRecord) -> None:
        self.steps.append(step)

    def __len__(self) -> int:
        return len(self.steps)


def zero_gradients(shapes: Mapping[str, tuple[int, int]]) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in shapes.items()}


def accumulate_log_policy_gradient(
    record: StepRecord, scale: float, grads: Mapping[str, np.ndarray]
) -> None:
    """Add scale * d log pi(chosen) / d logits into `grads` in place."""
    for i, schema in enumerate(record.action_schemas):
        coeff = (1.0 if i == record.chosen else 0.0) - record.probs[i]
        y = record.action_truth_rows[i]
        if y is None or coeff == 0.0:
            continue
        sample = record.slot_samples[schema][record.action_slots[i]]
        w = sample.w
        grads[schema][record.action_slots[i], sample.body] += scale * coeff * y * w * (1.0 - w)


def grad_log_policy(
    record: StepRecord,
    shapes: Mapping[str, tuple[int, int]],
    action: int | None = None,
) -> dict[str, np.ndarray]:
    """Gradient of log pi(action | state) with respect to every logit."""
    if action is not None and action != record.chosen:
        raise ValueError("tape was recorded for a different chosen action")
    grads = zero_gradients(shapes)
    accumulate_log_policy_gradient(record, 1.0, grads)
    return grads


def grad_semantic_loss(
    probabilities: Mapping[str, np.ndarray],
    tuples: Sequence[tuple[int, ...]],
) -> dict[str, np.ndarray]:
    """Gradient of the semantic loss with respect to every logit.

    `probabilities` maps schema name to its (slots, m) probability matrix.
    The loss is a sum of products of selected-atom probabilities; each
    member's partial is the product of the other members, chained through the
    logistic derivative.
    """
    grads = {name: np.zeros_like(P) for name, P in probabilities.items()}
    for name, P in probabilities.items():
        g = grads[name]
        for slot in range(P.shape[0]):
            row = P[slot]
            for tup in tuples:
                vals = row[list(tup)]
                for pos, j in enumerate(tup):
                    others = np.prod(np.delete(vals, pos))
                    g[slot, j] += others * row[j] * (1.0 - row[j])
    return grads
