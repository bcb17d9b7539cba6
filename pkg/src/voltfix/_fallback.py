"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d


@lru_cache(maxsize=8)
def _weights(n, h, simpson):
    W = np.zeros((n, n))
    for i in range(1, n):
        if not simpson:
            W[i, : i + 1] = h
            W[i, 0] = W[i, i] = 0.5 * h
            continue
        m = i if i % 2 == 0 else i - 1
        if m >= 2:
            row = np.full(m + 1, 2.0)
            row[1:m:2] = 4.0
            row[0] = row[m] = 1.0
            W[i, : m + 1] = row * (h / 3.0)
        if m != i:
            W[i, i - 1] += 0.5 * h
            W[i, i] += 0.5 * h
    W.setflags(write=False)
    return W


def weight_matrix(n, h, simpson):
    """Lower-triangular quadrature weights; row ``i`` integrates over ``[0, t_i]``."""
    return _weights(int(n), float(h), bool(simpson))


def tri_rowsum(G, h, simpson):
    G = np.asarray(G, dtype=np.float64)
    W = weight_matrix(G.shape[0], h, simpson)
    # upper triangle of G may hold garbage (even non-finite) values
    lower = np.where(W != 0.0, G, 0.0)
    return np.einsum("ij,ij->i", W, lower)


def window_modulus(X, w):
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    if w < 1 or n < 2:
        return np.zeros(m)
    # every pair within w nodes shares a window of w + 1 nodes, and clipped
    # edge windows are subsets of full ones
    size = min(w + 1, n)
    hi = maximum_filter1d(X, size, axis=1, mode="nearest")
    lo = minimum_filter1d(X, size, axis=1, mode="nearest")
    return (hi - lo).max(axis=1)
