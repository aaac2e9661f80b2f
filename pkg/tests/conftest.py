import numpy as np
import pytest

from faultbench.circuit import (
    DiagnosisInstance,
    Observation,
    build_full_adder,
    build_multiplier,
    generate_instance,
)


@pytest.fixture(scope="session")
def full_adder():
    return build_full_adder()


@pytest.fixture(scope="session")
def mult22():
    return build_multiplier(2, 2)


@pytest.fixture
def anomalous_fa_instance(full_adder):
    """The reference single-fault scenario: all-zero input, faulty input XOR.

    Input (0,0,0) with the first XOR stuck at one yields (sum=1, carry=0).
    """
    return DiagnosisInstance(
        full_adder, (Observation((0, 0, 0), (1, 0)),), frozenset({0})
    )


def random_instances(circuit, count, seed):
    rng = np.random.default_rng(seed)
    return [generate_instance(circuit, rng) for _ in range(count)]
