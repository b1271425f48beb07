import numpy as np
import pytest

from pgsp import InteractionMatrix


def random_interactions(rng, num_users, num_items, density=0.3):
    """Random binary interaction matrix with at least one interaction."""
    dense = (rng.random((num_users, num_items)) < density).astype(np.float64)
    if dense.sum() == 0:
        dense[rng.integers(num_users), rng.integers(num_items)] = 1.0
    return InteractionMatrix(dense)


def connected_interactions(rng, num_users, num_items, density=0.2):
    """Random interactions on a connected bipartite graph.

    Every user touches item 0 and every item touches some user, so the
    interaction graph is one component and the largest singular value of
    the normalized matrix is exactly 1.
    """
    dense = (rng.random((num_users, num_items)) < density).astype(np.float64)
    dense[:, 0] = 1.0
    for j in range(num_items):
        dense[j % num_users, j] = 1.0
    return InteractionMatrix(dense)


def gap_safe_k(eigenvalues, lo=2, hi=None):
    """Cut-off k (1-based count) with the largest spectral gap after it.

    ``eigenvalues`` must be in non-increasing order.  Keeps subspace
    comparisons well-posed: a tiny gap at the cut makes the projector
    ill-conditioned no matter how accurate the solver is.
    """
    eigenvalues = np.asarray(eigenvalues)
    if hi is None:
        hi = len(eigenvalues) - 1
    hi = min(hi, len(eigenvalues) - 1)
    gaps = eigenvalues[lo - 1 : hi] - eigenvalues[lo:hi]
    if gaps.size == 0:
        return lo
    return lo + int(np.argmax(gaps))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
