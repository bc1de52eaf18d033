"""First-order vocabulary, atom spaces, and state encoding.

The vocabulary splits predicates into extensional ones (facts appearing in
states and background knowledge) and target ones (action schemas whose
definitions are learned).  Two atom spaces derive from an alphabet: the
ground-atom space over constants, which state vectors index, and the
variable-atom space over variables, which rule bodies index.  Both use a
fixed lexicographic order so indices are reproducible across runs.

Grounding obeys object identity: distinct variables are never mapped to the
same constant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

EXTENSIONAL = "extensional"
TARGET = "target"


class VocabularyError(ValueError):
    """An atom, predicate, or term falls outside the alphabet."""


@dataclass(frozen=True, order=True)
class Predicate:
    name: str
    arity: int
    kind: str = EXTENSIONAL

    def __post_init__(self):
        if self.arity < 0:
            raise VocabularyError(f"negative arity for predicate {self.name}")
        if self.kind not in (EXTENSIONAL, TARGET):
            raise VocabularyError(f"unknown predicate kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class Atom:
    predicate: Predicate
    args: tuple = ()
    negated: bool = False

    def __post_init__(self):
        if len(self.args) != self.predicate.arity:
            raise VocabularyError(
                f"{self.predicate} applied to {len(self.args)} arguments"
            )

    @property
    def is_ground(self) -> bool:
        return all(isinstance(t, Constant) for t in self.args)

    def variables(self) -> tuple[Variable, ...]:
        """Variables in argument order, first occurrence only."""
        seen: list[Variable] = []
        for t in self.args:
            if isinstance(t, Variable) and t not in seen:
                seen.append(t)
        return tuple(seen)

    def substitute(self, mapping: Mapping[Variable, Constant]) -> "Atom":
        args = tuple(mapping.get(t, t) if isinstance(t, Variable) else t for t in self.args)
        return Atom(self.predicate, args, self.negated)

    def positive(self) -> "Atom":
        return Atom(self.predicate, self.args) if self.negated else self

    def __str__(self) -> str:
        inner = self.predicate.name
        if self.args:
            inner += "(" + ",".join(t.name for t in self.args) + ")"
        return f"not {inner}" if self.negated else inner


def _as_predicates(items: Iterable, kind: str) -> tuple[Predicate, ...]:
    preds = []
    for item in items:
        if isinstance(item, Predicate):
            preds.append(Predicate(item.name, item.arity, kind))
        else:
            name, arity = item
            preds.append(Predicate(name, int(arity), kind))
    return tuple(sorted(preds, key=lambda p: p.name))


class Alphabet:
    """The logical vocabulary: predicates, constants, and clause variables.

    Constants and variables are stored sorted by name, and predicates sorted
    by name within each kind, so every enumeration over the alphabet is
    deterministic.
    """

    def __init__(
        self,
        target_predicates: Iterable,
        extensional_predicates: Iterable,
        constants: Iterable[str],
        variables: Iterable[str],
        support_nullary: bool = True,
        support_negation: bool = False,
    ):
        self.targets = _as_predicates(target_predicates, TARGET)
        self.extensional = _as_predicates(extensional_predicates, EXTENSIONAL)
        self.constants = tuple(Constant(c) for c in sorted(set(constants)))
        self.variables = tuple(Variable(v) for v in sorted(set(variables)))
        self.support_nullary = support_nullary
        self.support_negation = support_negation

        names = [p.name for p in self.targets + self.extensional]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise VocabularyError(f"duplicate predicate names: {sorted(dupes)}")
        const_names = {c.name for c in self.constants}
        var_names = {v.name for v in self.variables}
        if const_names & var_names:
            raise VocabularyError("constants and variables share names")
        if not support_nullary:
            nullary = [str(p) for p in self.targets + self.extensional if p.arity == 0]
            if nullary:
                raise VocabularyError(f"nullary predicates not enabled: {nullary}")
        if not self.constants and any(p.arity > 0 for p in self.targets + self.extensional):
            raise VocabularyError("non-nullary predicates require constants")

        self._by_name = {p.name: p for p in self.targets + self.extensional}
        self._constants_by_name = {c.name: c for c in self.constants}
        self._variables_by_name = {v.name: v for v in self.variables}

    def predicate(self, name: str) -> Predicate:
        try:
            return self._by_name[name]
        except KeyError:
            raise VocabularyError(f"unknown predicate {name!r}") from None

    def term(self, name: str) -> Term:
        if name in self._variables_by_name:
            return self._variables_by_name[name]
        if name in self._constants_by_name:
            return self._constants_by_name[name]
        raise VocabularyError(f"unknown term {name!r}")

    def atom(self, pred_name: str, *arg_names: str, negated: bool = False) -> Atom:
        pred = self.predicate(pred_name)
        return Atom(pred, tuple(self.term(a) for a in arg_names), negated)

    def with_constants(self, constants: Iterable[str]) -> "Alphabet":
        """Same vocabulary over a different constant set (for variants)."""
        return Alphabet(
            self.targets,
            self.extensional,
            constants,
            (v.name for v in self.variables),
            self.support_nullary,
            self.support_negation,
        )


class AtomIndex:
    """A bijection between a fixed atom tuple and 0..n-1."""

    def __init__(self, atoms: Sequence[Atom]):
        self._atoms = tuple(atoms)
        self._index = {a: j for j, a in enumerate(self._atoms)}
        if len(self._index) != len(self._atoms):
            raise VocabularyError("duplicate atoms in index")

    def index(self, atom: Atom) -> int:
        try:
            return self._index[atom]
        except KeyError:
            raise VocabularyError(f"atom {atom} not in index") from None

    def atom(self, j: int) -> Atom:
        return self._atoms[j]

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._index

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._atoms)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self._atoms


def enumerate_ground_atoms(alphabet: Alphabet) -> AtomIndex:
    """All ground atoms over the extensional predicates and constants.

    Order: predicates by name, then argument tuples lexicographically in
    constant order (repetition allowed).
    """
    atoms = []
    for pred in alphabet.extensional:
        for args in itertools.product(alphabet.constants, repeat=pred.arity):
            atoms.append(Atom(pred, args))
    return AtomIndex(atoms)


def enumerate_variable_atoms(alphabet: Alphabet) -> AtomIndex:
    """All atoms over the extensional predicates and clause variables.

    Repeated variables are allowed.  When the alphabet supports negation, a
    negated copy of every atom is appended after the positive block, in the
    same order.
    """
    atoms = []
    for pred in alphabet.extensional:
        for args in itertools.product(alphabet.variables, repeat=pred.arity):
            atoms.append(Atom(pred, args))
    if alphabet.support_negation:
        atoms.extend(Atom(a.predicate, a.args, negated=True) for a in list(atoms))
    return AtomIndex(atoms)


def encode_state(
    state: Iterable[Atom], background: Iterable[Atom], index: AtomIndex
) -> np.ndarray:
    """Binary valuation over the ground-atom space: 1 iff the atom holds."""
    v = np.zeros(len(index), dtype=np.float64)
    for atom in itertools.chain(state, background):
        v[index.index(atom)] = 1.0
    return v


def enumerate_substitutions(
    free_vars: Sequence[Variable],
    pinned: Mapping[Variable, Constant],
    constants: Sequence[Constant],
) -> list[dict[Variable, Constant]]:
    """All injective extensions of `pinned` covering `free_vars`.

    Object identity: distinct variables map to distinct constants, so free
    variables range over constants outside the pinned range.  Substitutions
    come out in lexicographic order of the constant tuple assigned to
    `free_vars` (in the order given); a set is sorted by variable name first.
    Returns the empty list when there are more free variables than remaining
    constants.
    """
    if not isinstance(free_vars, Sequence):
        free_vars = sorted(free_vars, key=lambda v: v.name)
    pinned = dict(pinned)
    if len(set(pinned.values())) != len(pinned):
        raise ValueError("pinned substitution is not injective")
    if set(free_vars) & set(pinned):
        raise ValueError("free variables overlap the pinned domain")
    taken = set(pinned.values())
    available = [c for c in constants if c not in taken]
    subs = []
    for combo in itertools.permutations(available, len(free_vars)):
        sub = dict(pinned)
        sub.update(zip(free_vars, combo))
        subs.append(sub)
    return subs


class Domain:
    """An alphabet together with its two derived atom indexes."""

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet
        self.ground_atoms = enumerate_ground_atoms(alphabet)
        self.variable_atoms = enumerate_variable_atoms(alphabet)

    def encode(self, state: Iterable[Atom], background: Iterable[Atom] = ()) -> np.ndarray:
        return encode_state(state, background, self.ground_atoms)

    def canonical_head(self, schema: Predicate) -> Atom:
        """The schema applied to the first `arity` clause variables."""
        if schema.arity > len(self.alphabet.variables):
            raise VocabularyError(f"schema {schema} needs more variables than available")
        return Atom(schema, self.alphabet.variables[: schema.arity])


def parse_alphabet(text: str) -> Alphabet:
    """Parse an alphabet description.

    One declaration per line: ``target move/2``, ``ext on/2``,
    ``const a b c``, ``var X Y``, ``option negation`` or
    ``option no-nullary``.  ``#`` starts a comment.
    """
    targets: list[tuple[str, int]] = []
    extensional: list[tuple[str, int]] = []
    constants: list[str] = []
    variables: list[str] = []
    support_nullary = True
    support_negation = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        keyword, rest = fields[0], fields[1:]
        if keyword in ("target", "ext"):
            for spec in rest:
                if "/" not in spec:
                    raise VocabularyError(f"line {lineno}: expected name/arity, got {spec!r}")
                name, arity = spec.rsplit("/", 1)
                if not arity.isdigit():
                    raise VocabularyError(f"line {lineno}: bad arity in {spec!r}")
                (targets if keyword == "target" else extensional).append((name, int(arity)))
        elif keyword == "const":
            constants.extend(rest)
        elif keyword == "var":
            variables.extend(rest)
        elif keyword == "option":
            for opt in rest:
                if opt == "negation":
                    support_negation = True
                elif opt == "no-nullary":
                    support_nullary = False
                else:
                    raise VocabularyError(f"line {lineno}: unknown option {opt!r}")
        else:
            raise VocabularyError(f"line {lineno}: unknown declaration {keyword!r}")
    return Alphabet(targets, extensional, constants, variables, support_nullary, support_negation)


def load_alphabet(path) -> Alphabet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_alphabet(fh.read())
