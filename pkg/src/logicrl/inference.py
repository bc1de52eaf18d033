"""Fuzzy forward chaining over sampled rules.

A rule body is grounded under object identity with the head variables pinned
to the ground action's constants.  Each grounding row is looked up in the
state vector and scored with a weighted Lukasiewicz conjunction; the rule's
valuation is the maximum over rows, a schema's valuation the maximum over its
rule slots, and the action distribution a softmax over the per-action
valuations.

`PolicyEvaluator` is the production path: it caches, per head pinning, one
index matrix covering every variable-space atom over all full-variable
substitutions, so scoring a sampled body reduces to a column gather and a
matrix product.  Maxima agree with the per-body grounding used by the
reference functions because duplicated rows cannot change a maximum; tests
cross-check the two paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .logic import (
    Atom,
    Constant,
    Domain,
    Predicate,
    Variable,
    enumerate_substitutions,
)

TNORM_KINDS = ("godel", "product", "lukasiewicz")


def tnorm(kind: str, y: Sequence[float]) -> float:
    """Fuzzy conjunction of a truth vector."""
    arr = np.asarray(y, dtype=np.float64)
    if kind == "godel":
        return float(arr.min()) if arr.size else 1.0
    if kind == "product":
        return float(arr.prod())
    if kind == "lukasiewicz":
        return max(0.0, float(arr.sum()) - arr.size + 1.0)
    raise ValueError(f"unknown t-norm {kind!r}")


def weighted_lukasiewicz(y_row: Sequence[float], w: Sequence[float]) -> float:
    """max(0, <y, w> - len(w) + 1); the crisp all-ones case gives 1."""
    y = np.asarray(y_row, dtype=np.float64)
    wv = np.asarray(w, dtype=np.float64)
    if y.shape != wv.shape:
        raise ValueError(f"truth row has shape {y.shape}, weights {wv.shape}")
    return max(0.0, float(y @ wv) - wv.size + 1.0)


def rule_valuation(z: Sequence[float]) -> float:
    """Best valuation over substitutions; an unsatisfiable grounding is 0."""
    arr = np.asarray(z, dtype=np.float64)
    return float(arr.max()) if arr.size else 0.0


def combine_rules(values: Sequence[float]) -> tuple[float, int]:
    """Best valuation over a schema's rule slots and the winning slot.

    Ties go to the lowest slot so explanation traces are deterministic.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("a schema needs at least one rule slot")
    slot = int(np.argmax(arr))
    return float(arr[slot]), slot


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def action_distribution(values: Sequence[float]) -> np.ndarray:
    """Softmax over per-action valuations."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty ground action set")
    return softmax(arr)


def head_pinning(
    schema: Predicate, ground_action: Atom, variables: tuple[Variable, ...]
) -> dict[Variable, Constant] | None:
    """Map the schema's canonical head variables to the action's constants.

    Returns None when the action repeats a constant: such a pinning is not
    injective, so the ground action is invalid under object identity.
    """
    if ground_action.predicate != schema:
        raise ValueError(f"action {ground_action} does not instantiate {schema}")
    consts = ground_action.args
    if len(set(consts)) != len(consts):
        return None
    return dict(zip(variables[: schema.arity], consts))


@dataclass(frozen=True)
class Grounding:
    """Matrix form of a rule body under all object-identity substitutions.

    `X[k][l]` is the ground-atom index of body column l under substitution k;
    columns follow ascending atom index within the body.
    """

    X: np.ndarray
    substitutions: tuple
    body: tuple[int, ...]
    negated: np.ndarray


def build_grounding_matrix(b: np.ndarray, ground_action: Atom, domain: Domain) -> Grounding:
    """Ground a rule vector for one ground action.

    Head variables are pinned to the action's constants; the remaining body
    variables are enumerated injectively, ordered by first occurrence in the
    body (columns in ascending atom index, argument positions left to right).
    """
    alphabet = domain.alphabet
    pinned = head_pinning(ground_action.predicate, ground_action, alphabet.variables)
    if pinned is None:
        raise ValueError(f"ground action {ground_action} repeats a constant")
    body_idx = tuple(int(j) for j in np.flatnonzero(b))
    atoms = [domain.variable_atoms.atom(j) for j in body_idx]
    free: list[Variable] = []
    for atom in atoms:
        for var in atom.variables():
            if var not in pinned and var not in free:
                free.append(var)
    subs = enumerate_substitutions(free, pinned, alphabet.constants)
    X = np.empty((len(subs), len(atoms)), dtype=np.int64)
    for k, sub in enumerate(subs):
        for l, atom in enumerate(atoms):
            X[k, l] = domain.ground_atoms.index(atom.positive().substitute(sub))
    negated = np.array([a.negated for a in atoms], dtype=bool)
    return Grounding(X, tuple(subs), body_idx, negated)


def value_lookup(X: np.ndarray, v: np.ndarray, negated: np.ndarray | None = None) -> np.ndarray:
    """Gather state values for every grounded body atom."""
    Y = v[X] if X.size else np.zeros(X.shape, dtype=np.float64)
    if negated is not None and negated.any():
        Y = Y.copy()
        Y[:, negated] = 1.0 - Y[:, negated]
    return Y


def evaluate_rule(b: np.ndarray, w: np.ndarray, ground_action: Atom, v: np.ndarray,
                  domain: Domain) -> float:
    """Reference valuation of one sampled rule for one ground action."""
    g = build_grounding_matrix(b, ground_action, domain)
    Y = value_lookup(g.X, v, g.negated)
    z = [weighted_lukasiewicz(row, w) for row in Y]
    return rule_valuation(z)


@dataclass
class ActionEvaluation:
    action: Atom
    value: float
    slot: int
    y_star: np.ndarray | None  # truth row behind the valuation; None if clamped


@dataclass
class StepEvaluation:
    actions: tuple[Atom, ...]
    values: np.ndarray
    probs: np.ndarray
    per_action: list[ActionEvaluation]


class PolicyEvaluator:
    """Vectorized valuation of sampled rules over a step's ground actions."""

    def __init__(self, domain: Domain):
        self.domain = domain
        self._pins: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
        self._negated = np.array([a.negated for a in domain.variable_atoms], dtype=bool)

    def _pinned_matrix(self, pinned: Mapping[Variable, Constant]) -> np.ndarray:
        """Ground-atom indices for every variable atom under every full
        substitution extending `pinned` (rows) -- shape (N, m)."""
        key = tuple(sorted((v.name, c.name) for v, c in pinned.items()))
        hit = self._pins.get(key)
        if hit is not None:
            return hit
        alphabet = self.domain.alphabet
        rest = [v for v in alphabet.variables if v not in pinned]
        subs = enumerate_substitutions(rest, pinned, alphabet.constants)
        atoms = self.domain.variable_atoms.atoms
        M = np.empty((len(subs), len(atoms)), dtype=np.int64)
        for k, sub in enumerate(subs):
            for j, atom in enumerate(atoms):
                M[k, j] = self.domain.ground_atoms.index(atom.positive().substitute(sub))
        self._pins[key] = M
        return M

    def _eval_action(self, action: Atom, v: np.ndarray,
                     slot_rules: Sequence[tuple[np.ndarray, np.ndarray]]) -> ActionEvaluation:
        pinned = head_pinning(action.predicate, action, self.domain.alphabet.variables)
        if pinned is None:
            raise ValueError(f"ground action {action} repeats a constant")
        M = self._pinned_matrix(pinned)
        best = ActionEvaluation(action, 0.0, 0, None)
        for slot, (body, w) in enumerate(slot_rules):
            if M.shape[0] == 0:
                # fewer constants than variables: fall back to per-body grounding
                value, y_star = self._eval_slow(body, w, action, v)
            else:
                cols = M[:, body]
                Y = v[cols]
                if self._negated[body].any():
                    neg = self._negated[body]
                    Y[:, neg] = 1.0 - Y[:, neg]
                scores = Y @ w - (len(body) - 1.0)
                row = int(np.argmax(scores))
                value = float(scores[row])
                y_star = Y[row] if value > 0.0 else None
                value = max(value, 0.0)
            if slot == 0 or value > best.value:
                best = ActionEvaluation(action, value, slot, y_star if value > 0 else None)
        return best

    def _eval_slow(self, body: np.ndarray, w: np.ndarray, action: Atom,
                   v: np.ndarray) -> tuple[float, np.ndarray | None]:
        b = np.zeros(len(self.domain.variable_atoms), dtype=np.int8)
        b[body] = 1
        g = build_grounding_matrix(b, action, self.domain)
        Y = value_lookup(g.X, v, g.negated)
        if Y.shape[0] == 0:
            return 0.0, None
        scores = Y @ w - (len(g.body) - 1.0)
        row = int(np.argmax(scores))
        value = float(scores[row])
        return max(value, 0.0), (Y[row] if value > 0 else None)

    def evaluate(
        self,
        v: np.ndarray,
        ground_actions: Sequence[Atom],
        rules: Mapping[str, Sequence[tuple[np.ndarray, np.ndarray]]],
    ) -> StepEvaluation:
        """Score every ground action and return the action distribution.

        `rules` maps schema name to its slots as (body index array, weight
        array) pairs; all slots of a schema are evaluated for each of its
        ground actions and combined by max (ties to the lowest slot).
        """
        if not ground_actions:
            raise ValueError("empty ground action set")
        evals = [self._eval_action(a, v, rules[a.predicate.name]) for a in ground_actions]
        values = np.array([e.value for e in evals], dtype=np.float64)
        return StepEvaluation(tuple(ground_actions), values, softmax(values), evals)


def explain_action(
    b: np.ndarray, w: np.ndarray, action: Atom, v: np.ndarray, domain: Domain, slot: int
) -> str:
    """One-line trace of the winning substitution behind an action valuation."""
    g = build_grounding_matrix(b, action, domain)
    Y = value_lookup(g.X, v, g.negated)
    if Y.shape[0] == 0:
        return f"action={action} slot={slot} unsatisfiable (no substitution)"
    z = np.array([weighted_lukasiewicz(row, w) for row in Y])
    k = int(np.argmax(z))
    sub = g.substitutions[k]
    free = {var: const for var, const in sub.items()}
    bindings = ",".join(f"{var}={const}" for var, const in sorted(free.items(), key=lambda p: p[0].name))
    atoms = [domain.variable_atoms.atom(j) for j in g.body]
    truths = " ".join(f"{a.substitute(sub)}={int(Y[k, l])}" for l, a in enumerate(atoms))
    return (f"action={action} slot={slot} value={z[k]:.3f} "
            f"subst[{bindings}] body[{truths}]")
