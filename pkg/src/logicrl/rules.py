"""Rule generation: per-schema atom-membership logits and rule sampling.

Each action schema owns one or more rule slots.  A slot holds one logit per
variable-space atom; the logistic of a logit is the probability that the atom
belongs to the slot's rule body.  Training samples binary rule vectors with
the Gumbel-max trick (marginally Bernoulli in each atom); evaluation
thresholds at 0.5.  The weight vector lists the probabilities of exactly the
selected atoms, in ascending atom index.
"""

from __future__ import annotations

import json
from typing import Mapping, Union

import numpy as np

from .logic import Atom, AtomIndex, Domain, Predicate, Variable, VocabularyError

TRAIN = "train"
EVAL = "eval"

CHECKPOINT_FORMAT = "logicrl-rule-model"
CHECKPOINT_VERSION = 1


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sample_rule(P: np.ndarray, mode: str, rng: np.random.Generator | None = None):
    """Draw a rule vector from atom probabilities; returns (b, w).

    Train mode samples each atom by comparing Gumbel-perturbed log-odds, so
    atom j is selected with probability exactly P[j].  Eval mode includes an
    atom iff P[j] > 0.5.  An all-zero draw is repaired by force-including the
    atom with the largest probability (lowest index on ties); an empty body
    would make the rule valuation undefined.
    """
    if mode == TRAIN:
        if rng is None:
            raise ValueError("train-mode sampling needs a random generator")
        g = rng.gumbel(size=(2, len(P)))
        with np.errstate(divide="ignore"):
            b = (np.log(P) + g[0]) > (np.log1p(-P) + g[1])
    elif mode == EVAL:
        b = P > 0.5
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    b = b.astype(np.int8)
    if not b.any():
        b[int(np.argmax(P))] = 1
    w = P[b == 1].astype(np.float64)
    return b, w


def decode_rule(
    b: np.ndarray,
    schema: Predicate,
    index: AtomIndex,
    variables: tuple[Variable, ...],
) -> str:
    """Render a rule vector as a Datalog clause.

    The head applies the schema to the first `arity` clause variables; the
    body lists the selected atoms in ascending index order.
    """
    selected = [index.atom(j) for j in np.flatnonzero(b)]
    if not selected:
        raise ValueError("cannot decode a rule with an empty body")
    head = Atom(schema, variables[: schema.arity])
    body = ", ".join(str(a) for a in selected)
    return f"{head} :- {body}."


def parse_rule(text: str, alphabet) -> tuple[Predicate, frozenset[Atom]]:
    """Parse ``head :- body.`` into the schema and its body atom set.

    Head variables must be the canonical leading clause variables; body atoms
    are resolved against the alphabet.
    """
    text = text.strip().rstrip(".")
    if ":-" not in text:
        raise ValueError(f"expected 'head :- body', got {text!r}")
    head_text, body_text = (part.strip() for part in text.split(":-", 1))
    name = head_text.split("(", 1)[0].strip()
    schema = alphabet.predicate(name)
    atoms = []
    depth, start = 0, 0
    parts = []
    for i, ch in enumerate(body_text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(body_text[start:i])
            start = i + 1
    parts.append(body_text[start:])
    for part in parts:
        part = part.strip()
        negated = part.startswith("not ")
        if negated:
            part = part[4:].strip()
        if "(" in part:
            pname, inner = part.split("(", 1)
            args = [a.strip() for a in inner.rstrip(")").split(",")]
        else:
            pname, args = part, []
        atoms.append(alphabet.atom(pname.strip(), *args, negated=negated))
    return schema, frozenset(atoms)


def equivalent_bodies(
    body_a: frozenset[Atom],
    body_b: frozenset[Atom],
    fixed: tuple[Variable, ...] = (),
) -> bool:
    """Set equality of two bodies up to renaming their non-fixed variables.

    Head variables stay fixed; the free variables of one body are mapped
    bijectively onto the other's in every possible way.
    """
    import itertools

    if len(body_a) != len(body_b):
        return False

    def free_vars(body):
        seen = []
        for atom in sorted(body, key=str):
            for var in atom.variables():
                if var not in fixed and var not in seen:
                    seen.append(var)
        return seen

    vars_a, vars_b = free_vars(body_a), free_vars(body_b)
    if len(vars_a) != len(vars_b):
        return False
    for perm in itertools.permutations(vars_b):
        renaming = dict(zip(vars_a, perm))
        renamed = {
            Atom(a.predicate,
                 tuple(renaming.get(t, t) if isinstance(t, Variable) else t for t in a.args),
                 a.negated)
            for a in body_a
        }
        if renamed == set(body_b):
            return True
    return False


class RuleModel:
    """Trainable atom-membership logits for every (schema, slot) pair."""

    def __init__(
        self,
        domain: Domain,
        rules_per_schema: Union[int, Mapping[str, int]] = 1,
        init_logit: float = -2.0,
        init_noise: float = 0.01,
        rng: np.random.Generator | None = None,
    ):
        self.domain = domain
        self.schemas = domain.alphabet.targets
        m = len(domain.variable_atoms)
        if rng is None:
            rng = np.random.default_rng(0)
        self.logits: dict[str, np.ndarray] = {}
        self.slots: dict[str, int] = {}
        for schema in self.schemas:
            r = self._slot_count(schema, rules_per_schema)
            self.slots[schema.name] = r
            self.logits[schema.name] = init_logit + init_noise * rng.standard_normal((r, m))

    @staticmethod
    def _slot_count(schema: Predicate, rules_per_schema) -> int:
        if isinstance(rules_per_schema, int):
            r = rules_per_schema
        else:
            r = rules_per_schema.get(schema.name, 1)
        if r < 1:
            raise ValueError(f"schema {schema} needs at least one rule slot")
        return r

    def schema(self, name: str) -> Predicate:
        for s in self.schemas:
            if s.name == name:
                return s
        raise VocabularyError(f"unknown schema {name!r}")

    def atom_probabilities(self, schema_name: str, slot: int) -> np.ndarray:
        return sigmoid(self.logits[schema_name][slot])

    def sample(self, schema_name: str, slot: int, mode: str, rng=None):
        return sample_rule(self.atom_probabilities(schema_name, slot), mode, rng)

    def decode(self, schema_name: str, slot: int) -> str:
        b, _ = self.sample(schema_name, slot, EVAL)
        return decode_rule(
            b, self.schema(schema_name), self.domain.variable_atoms, self.domain.alphabet.variables
        )

    def export_rules(self) -> str:
        """Eval-mode decode of every slot, with probabilities as comments."""
        lines = []
        for schema in self.schemas:
            for slot in range(self.slots[schema.name]):
                P = self.atom_probabilities(schema.name, slot)
                b, w = sample_rule(P, EVAL)
                if P.max() <= 0.5:
                    lines.append(f"# warning: {schema.name} slot {slot} has no atom above "
                                 f"threshold; body repaired to the most likely atom")
                lines.append(self.decode(schema.name, slot))
                probs = ", ".join(
                    f"{self.domain.variable_atoms.atom(j)}={P[j]:.3f}" for j in np.flatnonzero(b)
                )
                lines.append(f"#   p: {probs}")
        return "\n".join(lines) + "\n"

    def save(self, path, metadata: dict | None = None) -> None:
        atoms = [str(a) for a in self.domain.variable_atoms]
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "atoms": atoms,
            "metadata": metadata or {},
            "logits": {
                name: [
                    {atoms[j]: float(row[j]) for j in range(len(atoms))}
                    for row in self.logits[name]
                ]
                for name in sorted(self.logits)
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, domain: Domain) -> tuple["RuleModel", dict]:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a rule-model checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        atoms = [str(a) for a in domain.variable_atoms]
        if payload["atoms"] != atoms:
            raise VocabularyError(
                f"{path}: checkpoint atom space does not match the alphabet"
            )
        slots = {name: len(rows) for name, rows in payload["logits"].items()}
        model_names = sorted(s.name for s in domain.alphabet.targets)
        if sorted(slots) != model_names:
            raise VocabularyError(f"{path}: checkpoint schemas {sorted(slots)} "
                                  f"do not match alphabet schemas {model_names}")
        model = cls(domain, rules_per_schema=slots)
        for name, rows in payload["logits"].items():
            for r, row in enumerate(rows):
                if sorted(row) != sorted(atoms):
                    raise VocabularyError(f"{path}: logit keys mismatch for {name} slot {r}")
                model.logits[name][r] = np.array([row[a] for a in atoms], dtype=np.float64)
        return model, payload.get("metadata", {})
