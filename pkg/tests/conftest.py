import pytest

from homnet.datasets import gen_local_transitivity


@pytest.fixture(scope="session")
def lt_doc():
    """The seed-0 chain dataset, shared: generation is cheap but the
    training-side tests also reuse its match-table plans via module state,
    and a single instance keeps the suite's memory bounded."""
    return gen_local_transitivity(0)
