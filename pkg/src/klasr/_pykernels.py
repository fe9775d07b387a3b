"""Pure-Python/numpy implementations of the numerical kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``KLASR_PURE_PYTHON=1`` is set.  Signatures and results match the compiled
module; the test-suite runs both side by side.
"""
import numpy as np

from .errors import NumericalError, SingularMatrixError

PIVOT_RTOL = 1e-14


def lu_factor(a, pivoting=True):
    """Row-pivoted LU factorization.

    Returns ``(lu, perm, sign)`` where ``lu`` packs the unit-lower ``L``
    below the diagonal and ``U`` on and above it, ``perm[i]`` is the row of
    the input that ended up in row ``i``, and ``sign`` is the permutation
    parity.
    """
    lu = np.array(a, dtype=np.float64, copy=True)
    n = lu.shape[0]
    perm = np.arange(n, dtype=np.int64)
    scale = np.abs(lu).max(axis=1)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k]))) if pivoting else k
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        pivot = lu[k, k]
        if abs(pivot) <= PIVOT_RTOL * scale[perm[k]] or pivot == 0.0:
            raise SingularMatrixError(f"matrix is singular at pivot {k}")
        lu[k + 1:, k] /= pivot
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm, sign


def lu_solve(lu, perm, b):
    b = np.asarray(b, dtype=np.float64)
    n = lu.shape[0]
    y = b[perm].copy()
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y


def lu_inverse(lu, perm):
    n = lu.shape[0]
    eye = np.eye(n)
    return lu_solve(lu, perm, eye)


def levinson(r, order):
    """Levinson-Durbin recursion in predictor form.

    Returns ``(a, errs, refl)``: ``a[i-1]`` multiplies ``x[t-i]``, ``errs[m]``
    is the prediction-error power at order ``m`` and ``refl`` holds the
    reflection coefficients.
    """
    r = np.asarray(r, dtype=np.float64)
    if r[0] <= 0.0:
        raise NumericalError("r[0] must be positive")
    a = np.zeros(order)
    refl = np.zeros(order)
    errs = np.empty(order + 1)
    err = r[0]
    errs[0] = err
    for m in range(order):
        acc = r[m + 1] - a[:m] @ r[m:0:-1]
        k = acc / err
        if abs(k) >= 1.0:
            raise NumericalError(
                f"reflection coefficient {k:.6g} at order {m + 1} is not inside (-1, 1)")
        prev = a[:m].copy()
        a[:m] = prev - k * prev[::-1]
        a[m] = k
        refl[m] = k
        err *= 1.0 - k * k
        errs[m + 1] = err
    return a, errs, refl


def burg(x, order):
    """Burg lattice recursion.  Same return layout as :func:`levinson`."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    f = x.copy()
    b = x.copy()
    a = np.zeros(order)
    refl = np.zeros(order)
    errs = np.empty(order + 1)
    err = float(x @ x) / n
    errs[0] = err
    floor = 1e-14 * err
    for m in range(order):
        ff = f[m + 1:]
        bb = b[m:n - 1]
        num = 2.0 * (ff @ bb)
        den = ff @ ff + bb @ bb
        if den <= 0.0:
            raise NumericalError(f"zero prediction-error power at order {m + 1}")
        k = num / den
        if abs(k) >= 1.0:
            raise NumericalError(
                f"reflection coefficient {k:.6g} at order {m + 1} is not inside (-1, 1)")
        fnew = ff - k * bb
        bnew = bb - k * ff
        f[m + 1:] = fnew
        b[m + 1:n] = bnew
        prev = a[:m].copy()
        a[:m] = prev - k * prev[::-1]
        a[m] = k
        refl[m] = k
        err *= 1.0 - k * k
        errs[m + 1] = err
        if err <= floor:
            raise NumericalError(
                f"prediction-error power vanished at order {m + 1}; input is perfectly predictable")
    return a, errs, refl


def residual_power(x, a):
    """Mean squared output of ``e[t] = x[t] - sum_i a[i-1] x[t-i]`` over ``t >= P``."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    p = a.shape[0]
    n = x.shape[0]
    if p == 0:
        return float(x @ x) / n
    h = np.concatenate(([1.0], -a))
    e = np.convolve(x, h, mode="valid")
    return float(e @ e) / (n - p)


def autocorr_matrix(x, order):
    x = np.asarray(x, dtype=np.float64)
    w = x.shape[0] // order
    frames = x[:w * order].reshape(w, order)
    return (frames.T @ frames) / w, w
