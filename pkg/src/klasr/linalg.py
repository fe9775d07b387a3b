"""Dense LU with simultaneous determinant, and the Levinson-Durbin solver.

The inner loops live in the kernel backend (compiled when available, see
:mod:`klasr._backend`).  Everything here works on ``float64`` ndarrays.
"""
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import NumericalError, SingularMatrixError


@dataclass(frozen=True)
class LuFactorization:
    """Packed ``P·A = L·U`` factors.

    ``lu`` holds the unit-lower ``L`` strictly below the diagonal and ``U``
    on and above it.  ``perm[i]`` is the original row now in row ``i``;
    ``sign`` is the parity of that permutation.
    """

    lu: np.ndarray
    perm: np.ndarray
    sign: int

    @property
    def order(self) -> int:
        return self.lu.shape[0]

    def lower(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.order)

    def upper(self) -> np.ndarray:
        return np.triu(self.lu)

    def permutation_matrix(self) -> np.ndarray:
        """``P`` such that ``P @ L @ U`` reconstructs the input."""
        pm = np.zeros((self.order, self.order))
        pm[self.perm, np.arange(self.order)] = 1.0
        return pm

    @property
    def pivots(self) -> np.ndarray:
        return np.diag(self.lu).copy()


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def lu_decompose(m, pivoting: bool = True) -> LuFactorization:
    """Factor a square matrix with partial (row) pivoting.

    ``pivoting=False`` factors in the given row order; for symmetric input
    all pivots are then positive iff the matrix is positive definite.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``1e-14`` times the largest magnitude in its
        original row.
    """
    lu, perm, sign = _backend.kernels.lu_factor(_as_square(m), bool(pivoting))
    return LuFactorization(lu, perm, int(sign))


def is_positive_definite(m) -> bool:
    """Unpivoted elimination succeeds with every pivot positive."""
    try:
        f = lu_decompose(m, pivoting=False)
    except NumericalError:
        return False
    return bool(np.all(f.pivots > 0.0))


def log_det(f: LuFactorization):
    """Return ``(log|det|, sign)`` so that ``sign * exp(log|det|) == det``.

    Summed in the log domain; a raw product overflows for order-25
    covariance matrices long before the matrices become ill-conditioned.
    """
    d = np.diag(f.lu)
    if np.any(d == 0.0):
        return -np.inf, 0
    sign = f.sign * (-1 if np.count_nonzero(d < 0) % 2 else 1)
    return float(np.sum(np.log(np.abs(d)))), int(sign)


def invert(f: LuFactorization) -> np.ndarray:
    return _backend.kernels.lu_inverse(f.lu, f.perm)


def solve(f: LuFactorization, b) -> np.ndarray:
    return _backend.kernels.lu_solve(f.lu, f.perm, np.asarray(b, dtype=np.float64))


def invert_with_logdet(m):
    """One factorization, both products: ``(inverse, log|det|, sign)``."""
    f = lu_decompose(m)
    ld, sign = log_det(f)
    return invert(f), ld, sign


def levinson_durbin(autocorr, order: int):
    """Solve the Toeplitz normal equations for a predictor of given order.

    Predictor convention: ``x[t] = sum(a[i-1] * x[t-i]) + e[t]``.

    Parameters
    ----------
    autocorr : array_like
        ``r[0], ..., r[order]`` (extra lags are ignored).
    order : int

    Returns
    -------
    ar_coeffs : ndarray, shape (order,)
    residual_variance : float
    """
    coeffs, errs, _ = levinson_durbin_full(autocorr, order)
    return coeffs, float(errs[-1])


def levinson_durbin_full(autocorr, order: int):
    """As :func:`levinson_durbin` but also returns per-order error powers
    and reflection coefficients."""
    r = np.asarray(autocorr, dtype=np.float64)
    if order < 0:
        raise ValueError("order must be non-negative")
    if r.ndim != 1 or r.shape[0] < order + 1:
        raise ValueError(f"need at least {order + 1} autocorrelation lags, got {r.shape}")
    if not r[0] > 0.0:
        raise NumericalError("r[0] must be positive")
    return _backend.kernels.levinson(r[:order + 1], int(order))


def toeplitz(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    idx = np.abs(np.arange(r.shape[0])[:, None] - np.arange(r.shape[0])[None, :])
    return r[idx]


__all__ = [
    "LuFactorization",
    "SingularMatrixError",
    "invert",
    "is_positive_definite",
    "invert_with_logdet",
    "levinson_durbin",
    "levinson_durbin_full",
    "log_det",
    "lu_decompose",
    "solve",
    "toeplitz",
]
