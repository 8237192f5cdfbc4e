import numpy as np
import pytest

from samid import SwitchedAffineModel, SwitchingSpec, first_coordinate_slabs


@pytest.fixture
def siso_model() -> SwitchedAffineModel:
    """Scalar bi-model with close slopes: y = 1.7x + 0.9 and y = 2.8x + 1.2."""
    return SwitchedAffineModel.from_parameters([([[1.7]], [0.9]), ([[2.8]], [1.2])])


@pytest.fixture
def mimo_model() -> SwitchedAffineModel:
    """Two-input two-output jump model sharing the whole input domain."""
    return SwitchedAffineModel.from_parameters(
        [
            ([[0.7, 0.4], [0.2, 0.3]], [-0.4, 0.17]),
            ([[0.8, 0.9], [0.4, 0.5]], [-0.81, -0.09]),
        ]
    )


@pytest.fixture
def sign_switching() -> SwitchingSpec:
    """Submodel 0 for d >= 0, submodel 1 for d < 0."""
    return SwitchingSpec.piecewise(first_coordinate_slabs(2))


def assert_labels_equivalent(a, b, K: int) -> None:
    """Equal as partitions: identical after the best relabeling."""
    from samid import match_clusters

    _, mismatches = match_clusters(np.asarray(a), np.asarray(b), K)
    assert mismatches == 0
