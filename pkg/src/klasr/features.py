"""Whole-word feature extraction.

Three LID feature types (autocorrelation matrix, averaged periodogram,
Burg AR model) and two baseline cepstra.  Every extractor consumes the
whole signal; nothing here segments or warps time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from . import _backend
from .errors import SignalError
from .linalg import is_positive_definite as _is_pd
from .signal_io import Signal

DEFAULT_REGULARIZATION = 1e-6
DEFAULT_PSD_WINDOW = 256
DEFAULT_PSD_OVERLAP = 0.5
PSD_FLOOR = 1e-12
LOG_ENERGY_FLOOR = 1e-10


def _samples(s) -> np.ndarray:
    if isinstance(s, Signal):
        return s.samples
    return np.asarray(s, dtype=np.float64)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# -- autocorrelation matrix -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class AutocorrMatrix:
    matrix: np.ndarray
    window_count: int

    @property
    def order(self) -> int:
        return self.matrix.shape[0]


def estimate_autocorr_matrix(s, order: int,
                             regularization: float = DEFAULT_REGULARIZATION) -> AutocorrMatrix:
    """Average of outer products over non-overlapping ``order``-sample windows.

    Windows cover samples ``[(i-1)P, iP)`` for ``i = 1..floor(n/P)``; the
    tail that does not fill a window is dropped.  The estimate is then
    loaded by ``regularization * trace/P`` on the diagonal.
    """
    x = _samples(s)
    if order < 1:
        raise ValueError("order must be >= 1")
    if regularization < 0:
        raise ValueError("regularization must be non-negative")
    if x.shape[0] < order:
        raise SignalError(f"signal of {x.shape[0]} samples is shorter than one window of {order}")
    k, w = _backend.kernels.autocorr_matrix(x, int(order))
    if regularization > 0.0:
        k = k + regularization * (np.trace(k) / order) * np.eye(order)
    return AutocorrMatrix(k, int(w))


def is_positive_definite(k: AutocorrMatrix) -> bool:
    """All pivots of the unpivoted LU factorization are positive."""
    return _is_pd(k.matrix)


# -- power spectral density -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Psd:
    """Averaged periodogram on bins ``1..window_len/2``.

    ``bins[j]`` is the power at frequency ``(j + 1) * sample_rate_hz /
    window_len``; DC is excluded and Nyquist included.
    """

    bins: np.ndarray
    window_len: int
    sample_rate_hz: int

    @property
    def n_bins(self) -> int:
        return self.bins.shape[0]

    def frequencies(self) -> np.ndarray:
        return np.arange(1, self.n_bins + 1) * self.sample_rate_hz / self.window_len


def hamming(n: int) -> np.ndarray:
    """Symmetric Hamming window of length ``n``."""
    if n == 1:
        return np.ones(1)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def estimate_psd(s: Signal, window_len: int = DEFAULT_PSD_WINDOW,
                 overlap_fraction: float = DEFAULT_PSD_OVERLAP) -> Psd:
    """Welch average of Hamming-windowed periodograms.

    Each periodogram is ``|DFT|^2 / sum(window^2)``, so white noise of
    variance ``s2`` has expected bin value ``s2``.  Bins are floored at
    ``1e-12`` of the largest bin.
    """
    x = _samples(s)
    if not _is_pow2(window_len) or window_len < 2:
        raise ValueError(f"window_len must be a power of two >= 2, got {window_len}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must be in [0, 1)")
    n = x.shape[0]
    if n < window_len:
        raise SignalError(f"window of {window_len} is longer than the signal ({n})")
    hop = max(1, int(round(window_len * (1.0 - overlap_fraction))))
    n_win = 1 + (n - window_len) // hop
    starts = np.arange(n_win) * hop
    frames = x[starts[:, None] + np.arange(window_len)[None, :]]
    win = hamming(window_len)
    spec = np.fft.rfft(frames * win, axis=1)[:, 1:]
    power = (spec.real ** 2 + spec.imag ** 2).mean(axis=0) / (win @ win)
    top = power.max()
    power = np.maximum(power, PSD_FLOOR * top if top > 0 else PSD_FLOOR)
    return Psd(power, int(window_len), int(getattr(s, "sample_rate_hz", 1)))


# -- AR modelling -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ArModel:
    """All-pole model ``x[t] = sum(coeffs[i-1] * x[t-i]) + e[t]``, ``var(e) = residual_variance``."""

    coeffs: np.ndarray
    residual_variance: float
    reflection: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64).ravel()
        object.__setattr__(self, "coeffs", c)
        if not self.residual_variance > 0.0:
            raise ValueError("residual_variance must be positive")

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    def whitening_filter(self) -> np.ndarray:
        """FIR taps of ``A(z) = 1 - sum(a_i z^-i)``."""
        return np.concatenate(([1.0], -self.coeffs))

    def poles(self) -> np.ndarray:
        return np.roots(self.whitening_filter())

    def is_stable(self) -> bool:
        return self.order == 0 or bool(np.all(np.abs(self.poles()) < 1.0))


def _burg(s, order: int):
    x = _samples(s)
    if order < 1:
        raise ValueError("order must be >= 1")
    if x.shape[0] <= 2 * order:
        raise SignalError(f"order {order} needs more than {2 * order} samples, got {x.shape[0]}")
    return _backend.kernels.burg(x, int(order))


def fit_ar_burg(s, order: int) -> ArModel:
    """Burg estimate minimizing summed forward and backward prediction error."""
    a, errs, refl = _burg(s, order)
    return ArModel(a, float(errs[-1]), refl)


def burg_error_powers(s, order: int) -> np.ndarray:
    """Prediction-error power after each Burg stage, orders ``0..order``."""
    return _burg(s, order)[1]


def whiten(s, model: ArModel) -> float:
    """Residual power of ``s`` through the whitening filter of ``model``.

    Only outputs with a full filter history (``t >= P``) are averaged.
    """
    x = _samples(s)
    if x.shape[0] < model.order + 2:
        raise SignalError(
            f"signal of {x.shape[0]} samples is too short for a filter of order {model.order}")
    return float(_backend.kernels.residual_power(x, model.coeffs))


# -- baselines ---------------------------------------------------------------------

CEPSTRUM_KINDS = ("ar_cepstrum", "msfb_cepstrum")


@dataclass(frozen=True, eq=False)
class CepstralVector:
    """``coeffs[q]`` is cepstral coefficient ``c_q``, ``q = 0..Q-1``."""

    coeffs: np.ndarray
    kind: str

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64).ravel()
        if c.size < 1:
            raise ValueError("need at least one cepstral coefficient")
        if self.kind not in CEPSTRUM_KINDS:
            raise ValueError(f"unknown cepstrum kind {self.kind!r}")
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.shape[0]


def ar_cepstrum(model: ArModel, n_coeffs: int) -> CepstralVector:
    """Power cepstrum of an AR model by the standard recursion.

    ``c_0 = ln(residual_variance)``;
    ``c_q = a_q + sum_{k<q} (k/q) c_k a_{q-k}`` with ``a_q = 0`` past the order.
    """
    if n_coeffs < 1:
        raise ValueError("n_coeffs must be >= 1")
    a = model.coeffs
    p = a.shape[0]
    c = np.zeros(n_coeffs)
    c[0] = np.log(model.residual_variance)
    for q in range(1, n_coeffs):
        acc = a[q - 1] if q <= p else 0.0
        for k in range(max(1, q - p), q):
            acc += (k / q) * c[k] * a[q - k - 1]
        c[q] = acc
    return CepstralVector(c, "ar_cepstrum")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, freqs: np.ndarray, sample_rate_hz: int) -> np.ndarray:
    """Triangular filters, equally spaced in mel between 0 and Nyquist.

    Returns an ``(n_filters, len(freqs))`` weight matrix with unit row sums,
    so each filter output is a weighted mean of the PSD over its band and a
    flat spectrum gives equal energies.  Filters too narrow to straddle a
    bin get the nearest bin so no row is empty.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), n_filters + 2))
    bank = np.zeros((n_filters, freqs.shape[0]))
    for j in range(n_filters):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[j] = np.clip(np.minimum(up, down), 0.0, None)
        if not bank[j].any():
            bank[j, np.argmin(np.abs(freqs - mid))] = 1.0
    return bank / bank.sum(axis=1, keepdims=True)


def msfb_cepstrum(s: Signal, n_filters: int = 24, n_ceps: int = 12,
                  window_len: int = DEFAULT_PSD_WINDOW,
                  overlap_fraction: float = DEFAULT_PSD_OVERLAP) -> CepstralVector:
    """Mel filter-bank log energies of the averaged PSD, then orthonormal DCT-II."""
    if n_ceps < 1 or n_filters < n_ceps:
        raise ValueError("need 1 <= n_ceps <= n_filters")
    psd = estimate_psd(s, window_len, overlap_fraction)
    bank = mel_filterbank(n_filters, psd.frequencies(), psd.sample_rate_hz)
    energies = bank @ psd.bins
    log_e = np.log(np.maximum(energies, LOG_ENERGY_FLOOR))
    return CepstralVector(dct(log_e, type=2, norm="ortho")[:n_ceps], "msfb_cepstrum")
