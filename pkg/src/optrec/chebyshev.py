"""Chebyshev polynomials of the first kind, Toeplitz helpers and point sets on [-1, 1]."""
from functools import lru_cache

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from .errors import InvalidInput


def _check_interval(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > 1.0):
        raise InvalidInput("Chebyshev evaluation is restricted to [-1, 1]")
    return x


def cheb_eval(j, x):
    """Evaluate T_j at ``x`` (scalar or array) with the three-term recurrence."""
    j = int(j)
    if j < 0:
        raise InvalidInput(f"degree must be nonnegative, got {j}")
    x = _check_interval(x)
    t_prev, t = np.ones_like(x), x.copy()
    if j == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    for _ in range(j - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t if t.ndim else float(t)


def cheb_vander(x, N):
    """Matrix V with V[i, k] = T_k(x_i) for k < N."""
    x = _check_interval(np.atleast_1d(x))
    V = np.empty((x.size, N))
    if N > 0:
        V[:, 0] = 1.0
    if N > 1:
        V[:, 1] = x
    for k in range(2, N):
        V[:, k] = 2.0 * x * V[:, k - 1] - V[:, k - 2]
    return V


def cheb_series(coeffs, x):
    """Evaluate sum_k coeffs[k] T_k(x); ``coeffs`` may be 2-D (one series per row)."""
    coeffs = np.asarray(coeffs, dtype=float)
    V = cheb_vander(x, coeffs.shape[-1])
    return coeffs @ V.T


def toeplitz(x, d=None):
    """Symmetric Toeplitz matrix with first row ``x[:d]``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInput("toeplitz needs a nonempty sequence")
    d = x.size if d is None else int(d)
    if d < 1 or d > x.size:
        raise InvalidInput(f"cannot build a {d}x{d} Toeplitz matrix from {x.size} entries")
    return scipy.linalg.toeplitz(x[:d])


def shift_matrix(j, d):
    """D_j: ones on the j-th sub- and superdiagonal of a d x d matrix."""
    if not 0 <= j < d:
        raise InvalidInput(f"D_{j} is undefined for size {d}")
    D = np.eye(d, k=j)
    if j:
        D += np.eye(d, k=-j)
    return D


@lru_cache(maxsize=64)
def gauss_legendre(q):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    x, w = leggauss(int(q))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def chebyshev_lobatto(n):
    """n Chebyshev points of the second kind, ascending; [0.] when n == 1."""
    if n < 1:
        raise InvalidInput("need at least one point")
    if n == 1:
        return np.zeros(1)
    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    x[np.abs(x) < 1e-16] = 0.0
    return x


def chebyshev_grid(size=4096):
    """Evaluation grid clustered at the endpoints (Chebyshev extreme points)."""
    return chebyshev_lobatto(size)


def grid_inflation(degree, size):
    """Factor c >= 1 with sup|p| <= c * max_grid|p| for deg p <= degree on chebyshev_grid(size).

    On the extreme points of T_M (M = size - 1), a polynomial of degree d <= M
    satisfies sup|p| <= max_grid|p| / cos(d pi / 2M).
    """
    M = size - 1
    if degree > M:
        raise InvalidInput("grid too coarse for the polynomial degree")
    if degree == 0:
        return 1.0
    return 1.0 / np.cos(degree * np.pi / (2.0 * M))
