import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial.distance import cdist

# first calls compile kernels, so per-example deadlines are meaningless
settings.register_profile(
    "mlcore", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("mlcore")


def oracle_distances(Q, R, p):
    """Independent pairwise Minkowski distances."""
    return cdist(np.asarray(Q, float), np.asarray(R, float), "minkowski", p=p)


def oracle_knn(R, Q, k, p, furthest=False, exclude_self=False):
    """Best-first k neighbours with index tie-breaking, from scipy distances."""
    D = oracle_distances(R if Q is None else Q, R, p)
    if exclude_self:
        np.fill_diagonal(D, np.nan)
    m, n = D.shape
    idx = np.empty((m, k), dtype=np.int64)
    dist = np.empty((m, k))
    cols = np.arange(n)
    for i in range(m):
        row = D[i]
        keep = ~np.isnan(row)
        key = -row[keep] if furthest else row[keep]
        order = np.lexsort((cols[keep], key))[:k]
        idx[i] = cols[keep][order]
        dist[i] = row[keep][order]
    return idx, dist


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
