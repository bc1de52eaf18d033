import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logicrl import (
    Alphabet,
    Domain,
    VocabularyError,
    encode_state,
    enumerate_ground_atoms,
    enumerate_substitutions,
    enumerate_variable_atoms,
    parse_alphabet,
)


def atom_texts(index):
    return [str(a) for a in index]


class TestAlphabet:
    def test_blocksworld_style_alphabet_builds(self):
        ab = Alphabet(
            [("move", 2)],
            [("top", 1), ("on", 2), ("goal_on", 2), ("isFloor", 1)],
            ["a", "b", "c"],
            ["X", "Y", "Z"],
        )
        assert [str(p) for p in ab.targets] == ["move/2"]
        assert [c.name for c in ab.constants] == ["a", "b", "c"]

    def test_nullary_targets_build(self):
        ab = Alphabet([("r", 0), ("s", 0)], [("p", 1), ("q", 2)], ["a", "b"], ["X", "Y"])
        assert len(ab.targets) == 2

    def test_predicate_in_both_kinds_rejected(self):
        with pytest.raises(VocabularyError):
            Alphabet([("p", 1)], [("p", 1), ("q", 2)], ["a"], ["X"])

    def test_duplicate_extensional_rejected(self):
        with pytest.raises(VocabularyError):
            Alphabet([], [("p", 1), ("p", 2)], ["a"], ["X"])

    def test_empty_constants_with_arity_rejected(self):
        with pytest.raises(VocabularyError):
            Alphabet([], [("p", 1)], [], ["X"])

    def test_nullary_flag(self):
        with pytest.raises(VocabularyError):
            Alphabet([("r", 0)], [("p", 1)], ["a"], ["X"], support_nullary=False)

    def test_orderings_are_lexicographic(self):
        ab = Alphabet([], [("q", 2), ("p", 1)], ["c", "a", "b"], ["Z", "X"])
        assert [p.name for p in ab.extensional] == ["p", "q"]
        assert [c.name for c in ab.constants] == ["a", "b", "c"]
        assert [v.name for v in ab.variables] == ["X", "Z"]


class TestGroundAtoms:
    def test_worked_example_order(self, toy_alphabet):
        gi = enumerate_ground_atoms(toy_alphabet)
        assert atom_texts(gi) == ["p(a)", "p(b)", "q(a,a)", "q(a,b)", "q(b,a)", "q(b,b)"]

    def test_empty_vocabulary(self):
        ab = Alphabet([("r", 0)], [], [], [])
        assert len(enumerate_ground_atoms(ab)) == 0

    def test_unary_count_equals_constants(self):
        ab = Alphabet([], [("p", 1)], ["a", "b", "c"], ["X"])
        assert len(enumerate_ground_atoms(ab)) == 3

    def test_size_law_and_bijectivity(self):
        ab = Alphabet([], [("p", 1), ("q", 2), ("n", 0)], ["a", "b", "c"], ["X", "Y"])
        gi = enumerate_ground_atoms(ab)
        expected = sum(len(ab.constants) ** p.arity for p in ab.extensional)
        assert len(gi) == expected
        for j, atom in enumerate(gi):
            assert gi.index(atom) == j
        # brute-force enumeration agrees as a set
        brute = {
            (p.name,) + tuple(c.name for c in args)
            for p in ab.extensional
            for args in itertools.product(ab.constants, repeat=p.arity)
        }
        assert {(a.predicate.name,) + tuple(t.name for t in a.args) for a in gi} == brute

    def test_stable_across_rebuilds(self, toy_alphabet):
        again = Alphabet([("r", 0), ("s", 0)], [("p", 1), ("q", 2)], ["b", "a"], ["Y", "X"])
        assert atom_texts(enumerate_ground_atoms(toy_alphabet)) == atom_texts(
            enumerate_ground_atoms(again)
        )


class TestVariableAtoms:
    def test_worked_example_order(self, toy_alphabet):
        vi = enumerate_variable_atoms(toy_alphabet)
        assert atom_texts(vi) == ["p(X)", "p(Y)", "q(X,X)", "q(X,Y)", "q(Y,X)", "q(Y,Y)"]

    def test_unary_count_equals_variables(self):
        ab = Alphabet([], [("p", 1)], ["a"], ["X", "Y", "Z"])
        assert len(enumerate_variable_atoms(ab)) == 3

    def test_negation_doubles_the_space(self):
        ab = Alphabet([], [("p", 1), ("q", 2)], ["a", "b"], ["X", "Y"],
                      support_negation=True)
        vi = enumerate_variable_atoms(ab)
        positive = [a for a in vi if not a.negated]
        negated = [a for a in vi if a.negated]
        assert len(vi) == 12 and len(positive) == len(negated) == 6
        assert [str(a) for a in negated] == ["not " + str(a) for a in positive]

    def test_bijectivity(self, toy_domain):
        vi = toy_domain.variable_atoms
        for j in range(len(vi)):
            assert vi.index(vi.atom(j)) == j


class TestEncodeState:
    def test_worked_example_vector(self, toy_domain, toy_state):
        v = encode_state(toy_state, frozenset(), toy_domain.ground_atoms)
        assert v.tolist() == [1, 0, 1, 1, 0, 0]

    def test_empty_state(self, toy_domain):
        assert encode_state((), (), toy_domain.ground_atoms).tolist() == [0] * 6

    def test_background_alone_sets_bits(self, toy_domain, toy_alphabet):
        v = encode_state((), {toy_alphabet.atom("p", "b")}, toy_domain.ground_atoms)
        assert v.tolist() == [0, 1, 0, 0, 0, 0]

    def test_duplicates_change_nothing(self, toy_domain, toy_alphabet, toy_state):
        v1 = encode_state(toy_state, frozenset(), toy_domain.ground_atoms)
        v2 = encode_state(list(toy_state) * 3, toy_state, toy_domain.ground_atoms)
        assert (v1 == v2).all()

    def test_unknown_atom_rejected(self, toy_domain):
        other = Alphabet([], [("z", 1)], ["a"], ["X"])
        with pytest.raises(VocabularyError):
            encode_state({other.atom("z", "a")}, (), toy_domain.ground_atoms)


class TestSubstitutions:
    def test_two_free_variables(self, toy_alphabet):
        X, Y = toy_alphabet.variables
        a, b = toy_alphabet.constants
        subs = enumerate_substitutions([X, Y], {}, toy_alphabet.constants)
        assert subs == [{X: a, Y: b}, {X: b, Y: a}]

    def test_repeated_constant_excluded(self, toy_alphabet):
        X, Y = toy_alphabet.variables
        a, _ = toy_alphabet.constants
        subs = enumerate_substitutions([X, Y], {}, toy_alphabet.constants)
        assert {X: a, Y: a} not in subs

    def test_pinned_extension(self):
        ab = Alphabet([], [("p", 1)], ["a", "b", "c", "floor"], ["X", "Y", "Z"])
        X, Y, Z = ab.variables
        c = ab.term("c")
        floor = ab.term("floor")
        subs = enumerate_substitutions([Z], {X: c, Y: floor}, ab.constants)
        # oracle: filter all unary maps by injectivity against the pinned range
        allowed = [t for t in ab.constants if t not in (c, floor)]
        assert [s[Z] for s in subs] == allowed
        assert all(s[X] == c and s[Y] == floor for s in subs)

    def test_too_few_constants_gives_empty(self):
        ab = Alphabet([], [("p", 1)], ["a", "b"], ["X", "Y", "Z"])
        assert enumerate_substitutions(ab.variables, {}, ab.constants) == []

    def test_non_injective_pin_rejected(self, toy_alphabet):
        X, Y = toy_alphabet.variables
        a, _ = toy_alphabet.constants
        with pytest.raises(ValueError):
            enumerate_substitutions([], {X: a, Y: a}, toy_alphabet.constants)

    @settings(max_examples=60, deadline=None)
    @given(n_consts=st.integers(0, 6), n_free=st.integers(0, 4), n_pinned=st.integers(0, 2))
    def test_count_is_falling_factorial(self, n_consts, n_free, n_pinned):
        if n_pinned > n_consts:
            return
        consts = [f"c{i}" for i in range(n_consts)]
        variables = [f"V{i}" for i in range(n_free + n_pinned)]
        ab = Alphabet([], [("p", 1)] if consts else [], consts, variables)
        pinned = dict(zip(ab.variables[:n_pinned], ab.constants[:n_pinned]))
        free = ab.variables[n_pinned:]
        subs = enumerate_substitutions(free, pinned, ab.constants)
        remaining = n_consts - n_pinned
        expected = 1
        for k in range(n_free):
            expected *= max(remaining - k, 0)
        assert len(subs) == expected
        # oracle: filter all total maps by injectivity
        brute = 0
        for combo in itertools.product(ab.constants, repeat=n_free):
            full = list(pinned.values()) + list(combo)
            if len(set(full)) == len(full):
                brute += 1
        assert len(subs) == brute


class TestAlphabetFiles:
    def test_parse_round_trip(self):
        text = """
        # blocksworld vocabulary
        target move/2
        ext top/1 on/2
        ext goal_on/2 isFloor/1
        const a b c
        const floor
        var X Y Z
        """
        ab = parse_alphabet(text)
        assert [str(p) for p in ab.targets] == ["move/2"]
        assert len(ab.extensional) == 4
        assert [c.name for c in ab.constants] == ["a", "b", "c", "floor"]

    def test_negation_option(self):
        ab = parse_alphabet("ext p/1\nconst a\nvar X\noption negation\n")
        assert ab.support_negation

    def test_bad_arity_rejected(self):
        with pytest.raises(VocabularyError):
            parse_alphabet("ext p/x\nconst a\nvar X\n")

    def test_unknown_keyword_rejected(self):
        with pytest.raises(VocabularyError):
            parse_alphabet("extensional p/1\n")


class TestDomain:
    def test_canonical_head_uses_leading_variables(self):
        ab = Alphabet([("move", 2)], [("on", 2)], ["a", "b"], ["X", "Y", "Z"])
        head = Domain(ab).canonical_head(ab.targets[0])
        assert str(head) == "move(X,Y)"

    def test_schema_arity_beyond_variables_rejected(self):
        ab = Alphabet([("move", 2)], [("on", 2)], ["a", "b"], ["X"])
        with pytest.raises(VocabularyError):
            Domain(ab).canonical_head(ab.targets[0])
