import pytest

from aamcbr.backends import OracleBackend
from aamcbr.datagen import build_template_pool, generate_test_sets
from aamcbr.domain import Case, CaseBase


@pytest.fixture
def gamma1():
    return CaseBase([Case({"n4"}, 0), Case({"p2", "n3", "n4"}, 1)])


@pytest.fixture
def n1():
    return frozenset({"n4", "p5"})


@pytest.fixture(scope="session")
def pool():
    return build_template_pool(seed=0)


@pytest.fixture(scope="session")
def test_sets(pool):
    return generate_test_sets(pool, 50, seed=0)


@pytest.fixture
def oracle(pool):
    return OracleBackend(pool.truth_table())
