"""Gaussian KL divergence and the per-method decision statistics.

All determinant terms are carried as log-determinants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .features import AutocorrMatrix, CepstralVector, Psd
from .linalg import invert, log_det, lu_decompose

STATISTIC_FORMS = ("full_kl", "paper_eq3")
CEPSTRAL_WEIGHTINGS = ("uniform", "index")


def _spd_logdet(m: np.ndarray):
    f = lu_decompose(m, pivoting=False)
    if np.any(f.pivots <= 0.0):
        raise NumericalError("matrix is not positive definite")
    return f, log_det(f)[0]


def _matrix(k) -> np.ndarray:
    return k.matrix if isinstance(k, AutocorrMatrix) else np.asarray(k, dtype=np.float64)


def kl_gaussian(k_x, k_r) -> float:
    """KL divergence of ``N(0, k_x)`` from ``N(0, k_r)`` in nats.

    ``0.5 * tr(k_r^-1 k_x) + 0.5 * ln(det k_r / det k_x) - n/2``.
    """
    kx = _matrix(k_x)
    kr = _matrix(k_r)
    if kx.shape != kr.shape:
        raise ValueError(f"order mismatch: {kx.shape} vs {kr.shape}")
    n = kx.shape[0]
    fr, ld_r = _spd_logdet(kr)
    _, ld_x = _spd_logdet(kx)
    tr = float(np.sum(invert(fr) * kx.T))
    val = 0.5 * (tr + ld_r - ld_x - n)
    if val < 0.0:
        if val < -1e-9:
            raise NumericalError(f"negative divergence {val:.3g}; inputs not SPD?")
        val = 0.0
    return val


@dataclass(frozen=True, eq=False)
class CorrelationTemplate:
    """Dictionary side of the correlation statistic: ``K_r^-1`` and ``ln det K_r``."""

    inverse_matrix: np.ndarray
    log_det_r: float

    @property
    def order(self) -> int:
        return self.inverse_matrix.shape[0]


def make_correlation_template(k_r) -> CorrelationTemplate:
    kr = _matrix(k_r)
    f, ld = _spd_logdet(kr)
    inv = invert(f)
    # inverse of a symmetric matrix, symmetrized against rounding
    inv = 0.5 * (inv + inv.T)
    return CorrelationTemplate(inv, ld)


def stat_correlation(k_x, template: CorrelationTemplate, form: str = "full_kl",
                     log_det_x: float | None = None) -> float:
    """Correlation decision statistic.

    ``paper_eq3``: ``tr(K_r^-1 K_x) - ln det K_x``, as printed.
    ``full_kl``: ``tr(K_r^-1 K_x) + ln det K_r - ln det K_x - P``, which is
    twice the Gaussian KL divergence.

    ``log_det_x`` may be passed in to avoid refactoring ``K_x`` once per
    dictionary entry.
    """
    kx = _matrix(k_x)
    if kx.shape[0] != template.order:
        raise ValueError(f"order mismatch: input {kx.shape[0]} vs template {template.order}")
    if form not in STATISTIC_FORMS:
        raise ValueError(f"unknown statistic form {form!r}")
    if log_det_x is None:
        log_det_x = _spd_logdet(kx)[1]
    tr = float(np.sum(template.inverse_matrix * kx))
    if form == "paper_eq3":
        return tr - log_det_x
    return tr + template.log_det_r - log_det_x - template.order


def _bins(g) -> np.ndarray:
    return g.bins if isinstance(g, Psd) else np.asarray(g, dtype=np.float64)


def stat_spectral(g_x, g_r) -> float:
    """Mean over bins of ``t - ln t`` with ``t = G_x / G_r``; minimum 1 at ``G_x == G_r``."""
    if isinstance(g_x, Psd) and isinstance(g_r, Psd):
        if g_x.window_len != g_r.window_len or g_x.sample_rate_hz != g_r.sample_rate_hz:
            raise ValueError("PSDs differ in window length or sample rate")
    gx, gr = _bins(g_x), _bins(g_r)
    if gx.shape != gr.shape:
        raise ValueError(f"bin-count mismatch: {gx.shape[0]} vs {gr.shape[0]}")
    if np.any(gx <= 0.0) or np.any(gr <= 0.0):
        raise ValueError("PSD bins must be positive")
    t = gx / gr
    return float(np.mean(t - np.log(t)))


def stat_filter(residual_variance_xr: float, model_variance_r: float) -> float:
    """``t - ln t`` with ``t`` the residual-to-excitation variance ratio."""
    if not (residual_variance_xr > 0.0 and model_variance_r > 0.0):
        raise ValueError("variances must be strictly positive")
    t = residual_variance_xr / model_variance_r
    return float(t - np.log(t))


def _check_cepstra(c_x: CepstralVector, c_r: CepstralVector, same_kind=True):
    if len(c_x) != len(c_r):
        raise ValueError(f"length mismatch: {len(c_x)} vs {len(c_r)}")
    if same_kind and c_x.kind != c_r.kind:
        raise ValueError(f"kind mismatch: {c_x.kind} vs {c_r.kind}")


def dist_cepstral(c_x: CepstralVector, c_r: CepstralVector, weighting: str = "index") -> float:
    """Weighted Euclidean cepstral distance, ``w_q = 1`` or ``w_q = q``.

    Index weighting zeroes ``c_0`` and so ignores overall gain.  This is a
    stand-in for the Hermansky-Junqua exponential distance.
    """
    _check_cepstra(c_x, c_r)
    if weighting not in CEPSTRAL_WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    d = c_x.coeffs - c_r.coeffs
    w = np.arange(d.shape[0], dtype=np.float64) if weighting == "index" else np.ones(d.shape[0])
    return float(np.sqrt(np.sum(w * d * d)))


def dist_euclid(c_x, c_r) -> float:
    if isinstance(c_x, CepstralVector) and isinstance(c_r, CepstralVector):
        _check_cepstra(c_x, c_r, same_kind=False)
        a, b = c_x.coeffs, c_r.coeffs
    else:
        a, b = np.asarray(c_x, dtype=np.float64), np.asarray(c_r, dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError("length mismatch")
    return float(np.linalg.norm(a - b))
