import math

import numpy as np
import pytest

from treecascade import (
    Atomic,
    Deterministic,
    LogNormal,
    LogUniform,
    ModelSpec,
)

LN2 = math.log(2.0)

# closed-form targets for the i.i.d. Gaussian model, d = 2, log-label ~ N(-1.5, 1)
GAUSS_S1 = 1.5 - math.sqrt(2.25 - 2 * LN2)
GAUSS_USTAR = math.sqrt(2.25 - 2 * LN2)
GAUSS_LAMBDA = 2.0 * math.exp(-1.125)
GAUSS_X0 = 1.5 - math.sqrt(2 * LN2)
GOLDEN_S1 = math.log2(2.0 / (math.sqrt(5.0) - 1.0))


@pytest.fixture(scope="session")
def gauss_model():
    return ModelSpec.iid(2, LogNormal(-1.5, 1.0))


@pytest.fixture(scope="session")
def atomic_model():
    return ModelSpec.iid(2, Atomic((0.25, 0.5), (0.5, 0.5)))


@pytest.fixture(scope="session")
def loguniform_model():
    return ModelSpec.iid(2, LogUniform(-3.0, 0.5))


@pytest.fixture(scope="session")
def mixed2_model():
    return ModelSpec(
        2,
        (
            (Atomic((0.25, 0.5), (0.5, 0.5)), LogNormal(-1.2, 0.8)),
            (LogUniform(-2.5, 0.3), Deterministic(0.45)),
        ),
    )


@pytest.fixture(scope="session")
def mixed3_model():
    return ModelSpec(
        3,
        (
            (LogNormal(-1.6, 1.0), Atomic((0.2, 0.6), (0.5, 0.5)), LogUniform(-2.0, 0.2)),
            (Atomic((0.3, 0.45, 0.9), (0.3, 0.4, 0.3)), LogNormal(-1.1, 0.6), Deterministic(0.5)),
            (LogUniform(-3.0, 0.0), Deterministic(0.35), LogNormal(-1.3, 0.9)),
        ),
    )


@pytest.fixture(scope="session")
def battery(gauss_model, atomic_model, loguniform_model, mixed2_model, mixed3_model):
    """Admissible finite-regime models spanning families, d and colour dependence."""
    return {
        "gauss_iid_d2": gauss_model,
        "atomic_iid_d2": atomic_model,
        "loguniform_iid_d2": loguniform_model,
        "mixed_colour_2x2": mixed2_model,
        "mixed_colour_3x3": mixed3_model,
        "gauss_wide_iid_d2": ModelSpec.iid(2, LogNormal(-1.0, 0.7)),
    }


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
