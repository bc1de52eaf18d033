import numpy as np
import pytest

from logicrl import Alphabet, Domain


@pytest.fixture
def toy_alphabet():
    """Two nullary actions over p/1, q/2 with constants {a,b}, variables {X,Y}."""
    return Alphabet(
        target_predicates=[("r", 0), ("s", 0)],
        extensional_predicates=[("p", 1), ("q", 2)],
        constants=["a", "b"],
        variables=["X", "Y"],
    )


@pytest.fixture
def toy_domain(toy_alphabet):
    return Domain(toy_alphabet)


@pytest.fixture
def toy_state(toy_alphabet):
    ab = toy_alphabet
    return frozenset({ab.atom("p", "a"), ab.atom("q", "a", "a"), ab.atom("q", "a", "b")})


@pytest.fixture
def rng():
    return np.random.default_rng(7)
