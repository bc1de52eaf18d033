"""Semantic constraints on rule bodies.

Constraints are declared as Datalog-like axioms, either falsity clauses
(``false :- less(X,Y), less(Y,X).``) or rewrite clauses whose head becomes
redundant when it co-occurs with the body (``less(X,Z) :- less(X,Y),
less(Y,Z).``).  Compilation renames the axiom's variables injectively into
the policy's clause variables and records, for each renaming, the index tuple
of atoms that must not be jointly selected in one rule body.  The semantic
loss is the sum, over compiled tuples and over every rule slot, of the
product of the member probabilities; it is differentiable and zero exactly
when no forbidden tuple is jointly likely.
"""

from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .logic import Alphabet, Atom, AtomIndex, Predicate, Variable, VocabularyError

_ATOM_RE = re.compile(r"\s*(not\s+)?([a-z_][A-Za-z0-9_]*)\s*(\(([^()]*)\))?\s*")


class ConstraintSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Axiom:
    """head=None encodes a falsity axiom."""

    head: Atom | None
    body: tuple[Atom, ...]

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self.body if self.head is None else self.body + (self.head,)

    def variables(self) -> tuple[Variable, ...]:
        seen: list[Variable] = []
        for atom in self.atoms:
            for var in atom.variables():
                if var not in seen:
                    seen.append(var)
        return tuple(seen)


@dataclass(frozen=True)
class CompiledConstraint:
    """Forbidden co-selection tuples over the variable-atom space."""

    tuples: frozenset[tuple[int, ...]]

    def sorted_tuples(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted(self.tuples))


def _parse_pattern(text: str, lineno: int, alphabet: Alphabet | None) -> Atom:
    m = _ATOM_RE.fullmatch(text)
    if not m:
        raise ConstraintSyntaxError(f"line {lineno}: cannot parse atom {text!r}")
    negated, name, _, argtext = m.groups()
    args = [a.strip() for a in argtext.split(",")] if argtext else []
    if any(not a for a in args):
        raise ConstraintSyntaxError(f"line {lineno}: empty argument in {text!r}")
    for a in args:
        if not a[0].isupper():
            raise ConstraintSyntaxError(
                f"line {lineno}: constraint arguments must be variables, got {a!r}"
            )
    if alphabet is not None:
        try:
            pred = alphabet.predicate(name)
        except VocabularyError:
            raise ConstraintSyntaxError(f"line {lineno}: unknown predicate {name!r}") from None
        if pred.arity != len(args):
            raise ConstraintSyntaxError(
                f"line {lineno}: {name} has arity {pred.arity}, got {len(args)} arguments"
            )
    else:
        pred = Predicate(name, len(args))
    return Atom(pred, tuple(Variable(a) for a in args), negated=bool(negated))


def parse_constraints(text: str, alphabet: Alphabet | None = None) -> list[Axiom]:
    """Parse one axiom per line; ``#`` starts a comment.

    When an alphabet is given, predicate names and arities are validated
    against it.
    """
    axioms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":-" not in line:
            raise ConstraintSyntaxError(f"line {lineno}: expected 'head :- body'")
        head_text, body_text = line.split(":-", 1)
        body_text = body_text.strip().rstrip(".")
        head_text = head_text.strip()
        if not body_text:
            raise ConstraintSyntaxError(f"line {lineno}: empty axiom body")
        body = tuple(_parse_pattern(part, lineno, alphabet)
                     for part in _split_atoms(body_text, lineno))
        head = None if head_text == "false" else _parse_pattern(head_text, lineno, alphabet)
        axioms.append(Axiom(head, body))
    return axioms


def _split_atoms(text: str, lineno: int) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ConstraintSyntaxError(f"line {lineno}: unbalanced parentheses")
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    if depth != 0:
        raise ConstraintSyntaxError(f"line {lineno}: unbalanced parentheses")
    parts.append(text[start:])
    return parts


def compile_constraint(
    axiom: Axiom, index: AtomIndex, variables: Sequence[Variable]
) -> CompiledConstraint:
    """Instantiate an axiom over the policy's clause variables.

    Every injective renaming of the axiom's variables into `variables` yields
    one tuple: the body atom indices for a falsity axiom, body plus head for a
    rewrite axiom (joint presence makes the head redundant by subsumption).
    """
    axiom_vars = axiom.variables()
    if len(axiom_vars) > len(variables):
        warnings.warn(
            f"axiom over {len(axiom_vars)} variables cannot embed into "
            f"{len(variables)} policy variables; skipped",
            stacklevel=2,
        )
        return CompiledConstraint(frozenset())
    tuples = set()
    for combo in itertools.permutations(variables, len(axiom_vars)):
        renaming = dict(zip(axiom_vars, combo))
        indices = set()
        for atom in axiom.atoms:
            renamed = Atom(atom.predicate, tuple(renaming[t] for t in atom.args), atom.negated)
            indices.add(index.index(renamed))
        if len(indices) >= 2:
            tuples.add(tuple(sorted(indices)))
    return CompiledConstraint(frozenset(tuples))


def compile_constraints(
    axioms: Iterable[Axiom], index: AtomIndex, variables: Sequence[Variable]
) -> tuple[tuple[int, ...], ...]:
    """Union of all axioms' tuples, deduplicated and sorted."""
    merged = set()
    for axiom in axioms:
        merged |= compile_constraint(axiom, index, variables).tuples
    return tuple(sorted(merged))


def semantic_loss(
    probabilities: Iterable[np.ndarray], tuples: Sequence[tuple[int, ...]]
) -> float:
    """Sum over tuples and rule slots of the product of member probabilities."""
    total = 0.0
    for P in probabilities:
        for tup in tuples:
            total += float(np.prod(P[list(tup)]))
    return total


def load_preset(name: str) -> str:
    """Bundled constraint file for a named environment."""
    ref = resources.files("logicrl.presets").joinpath(f"{name}.constraints")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"no constraint preset named {name!r}") from None
