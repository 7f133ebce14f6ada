import numpy as np
import pytest

from ergotorus.torus import GeneratorMeasure, LatticeMatrix

A = LatticeMatrix(((2, 1), (1, 1)))
B = LatticeMatrix(((0, 1), (-1, 0)))
C = LatticeMatrix(((1, 1), (1, 2)))
BA = B @ A

# x = (sqrt2 - 1, sqrt3 - 1): badly approximable, the standard start point
X_DIOPH = (np.sqrt(2) - 1.0, np.sqrt(3) - 1.0)


@pytest.fixture
def rho_degenerate():
    """Support {A, BA}: BA swaps the eigenlines of A, variance can vanish."""
    return GeneratorMeasure.uniform([A, BA])


@pytest.fixture
def rho_expanding():
    """Support {A, C}: distinct eigenline pairs, positive entries."""
    return GeneratorMeasure.uniform([A, C])
