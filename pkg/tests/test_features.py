import math

import numpy as np
import pytest
from scipy.signal import lfilter

from klasr.errors import SignalError
from klasr.features import (ArModel, ar_cepstrum, burg_error_powers, estimate_autocorr_matrix,
                            estimate_psd, fit_ar_burg, hamming, hz_to_mel, is_positive_definite,
                            mel_filterbank, mel_to_hz, msfb_cepstrum, whiten)
from klasr.signal_io import Signal

FS = 8000


def ar_signal(coeffs, n, seed, sigma2=1.0):
    rng = np.random.default_rng(seed)
    burn = 1000
    e = rng.standard_normal(n + burn) * math.sqrt(sigma2)
    return Signal(lfilter([1.0], np.concatenate(([1.0], -np.asarray(coeffs))), e)[burn:], FS)


# -- autocorrelation matrix --------------------------------------------------------

def test_white_noise_autocorr_near_identity(backend):
    x = Signal(np.random.default_rng(0).standard_normal(100_000), FS)
    k = estimate_autocorr_matrix(x, 4, 0.0).matrix
    off = k - np.diag(np.diag(k))
    assert np.abs(off).max() < 0.05
    np.testing.assert_allclose(np.diag(k), 1.0, atol=0.05)


def test_single_window_outer_product(backend):
    x = np.array([1.0, -2.0, 3.0])
    k = estimate_autocorr_matrix(x, 3, 0.0)
    assert k.window_count == 1
    np.testing.assert_array_equal(k.matrix, np.outer(x, x))


def test_constant_signal(backend):
    k = estimate_autocorr_matrix(np.full(10, 0.7), 2, 0.0).matrix
    np.testing.assert_allclose(k, 0.49)


def test_windows_drop_tail(backend, rng):
    x = rng.standard_normal(11)
    k = estimate_autocorr_matrix(x, 3, 0.0)
    blocks = x[:9].reshape(3, 3)
    assert k.window_count == 3
    np.testing.assert_allclose(k.matrix, blocks.T @ blocks / 3)


def test_regularization_loads_diagonal(backend, rng):
    x = rng.standard_normal(3)
    k = estimate_autocorr_matrix(x, 3, 1e-6).matrix
    np.testing.assert_allclose(k - np.outer(x, x), 1e-6 * (x @ x) / 3 * np.eye(3))
    assert is_positive_definite(estimate_autocorr_matrix(x, 3, 1e-8))


def test_ar1_autocorr_converges_to_toeplitz(backend):
    a = 0.6
    x = ar_signal([a], 100_000, 1)
    k = estimate_autocorr_matrix(x, 8, 0.0).matrix
    lags = np.abs(np.subtract.outer(np.arange(8), np.arange(8)))
    true = a ** lags / (1 - a * a)
    # relative to the variance r_0; far-lag entries are too small for a per-entry ratio
    assert np.abs(k - true).max() <= 0.05 * true[0, 0]


def test_autocorr_validation():
    with pytest.raises(SignalError):
        estimate_autocorr_matrix(np.ones(3), 4)
    with pytest.raises(ValueError):
        estimate_autocorr_matrix(np.ones(3), 0)
    with pytest.raises(ValueError):
        estimate_autocorr_matrix(np.ones(3), 1, -1.0)


# -- PSD -----------------------------------------------------------------------------

def test_hamming_symmetric():
    w = hamming(9)
    np.testing.assert_allclose(w, w[::-1])
    assert w[0] == pytest.approx(0.08)
    assert w[4] == pytest.approx(1.0)


def test_tone_lands_in_its_bin():
    n, k = 256, 20
    x = Signal(np.cos(2 * np.pi * k * np.arange(4 * n) / n), FS)
    psd = estimate_psd(x, n)
    assert int(np.argmax(psd.bins)) + 1 == k
    assert psd.frequencies()[k - 1] == pytest.approx(k * FS / n)


def test_white_noise_flat_and_parseval():
    x = Signal(np.random.default_rng(2).standard_normal(100_000), FS)
    psd = estimate_psd(x, 128)
    assert psd.n_bins == 64
    np.testing.assert_allclose(psd.bins, psd.bins.mean(), rtol=0.10)
    assert psd.bins.mean() == pytest.approx(x.samples.var(), rel=0.10)


def test_one_window_matches_direct_dft(rng):
    n = 64
    x = rng.standard_normal(n)
    w = 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
    t = np.arange(n)
    direct = np.array([abs(np.sum(x * w * np.exp(-2j * np.pi * k * t / n))) ** 2
                       for k in range(1, n // 2 + 1)]) / np.sum(w * w)
    psd = estimate_psd(Signal(x, FS), n, 0.5)
    np.testing.assert_allclose(psd.bins, np.maximum(direct, 1e-12 * direct.max()), rtol=1e-9)


def test_psd_floor_and_validation():
    x = Signal(np.cos(np.pi * np.arange(64) / 2), FS)
    psd = estimate_psd(x, 64)
    assert psd.bins.min() >= 1e-12 * psd.bins.max()
    with pytest.raises(ValueError):
        estimate_psd(x, 48)
    with pytest.raises(ValueError):
        estimate_psd(x, 32, 1.0)
    with pytest.raises(SignalError):
        estimate_psd(x, 128)


# -- Burg / whitening --------------------------------------------------------------------

def test_burg_recovers_ar2(backend):
    x = ar_signal([1.0, -0.5], 100_000, 3)
    m = fit_ar_burg(x, 2)
    np.testing.assert_allclose(m.coeffs, [1.0, -0.5], atol=0.02)
    assert m.residual_variance == pytest.approx(1.0, rel=0.05)
    assert m.is_stable()


def test_burg_white_noise(backend):
    x = Signal(np.random.default_rng(4).standard_normal(100_000), FS)
    assert np.all(np.abs(fit_ar_burg(x, 4).coeffs) < 0.05)


def test_burg_ar1(backend):
    assert fit_ar_burg(ar_signal([0.9], 100_000, 5), 1).coeffs[0] == pytest.approx(0.9, abs=0.01)


def test_burg_error_powers_monotone(backend, rng):
    for seed in range(5):
        x = ar_signal(rng.uniform(-0.3, 0.3, 3), 2000, seed)
        errs = burg_error_powers(x, 30)
        assert errs.shape == (31,)
        assert np.all(np.diff(errs) <= 0.0)


def test_burg_validation():
    with pytest.raises(SignalError):
        fit_ar_burg(np.ones(8), 4)
    with pytest.raises(ValueError):
        fit_ar_burg(np.ones(8), 0)


def test_whiten_self_consistent(backend):
    x = ar_signal([1.2, -0.7, 0.1], 50_000, 6)
    m = fit_ar_burg(x, 10)
    assert whiten(x, m) == pytest.approx(m.residual_variance, rel=0.10)


def test_whiten_identity_filter(backend, rng):
    x = rng.standard_normal(100)
    assert whiten(x, ArModel(np.zeros(3), 1.0)) == pytest.approx(np.mean(x[3:] ** 2), rel=1e-12)


def test_whiten_true_model(backend):
    x = ar_signal([0.9], 100_000, 7, sigma2=2.0)
    assert whiten(x, ArModel([0.9], 2.0)) == pytest.approx(2.0, rel=0.03)


def test_whiten_too_short():
    with pytest.raises(SignalError):
        whiten(np.ones(3), ArModel(np.zeros(2), 1.0))


def test_ar_model_filter_and_stability():
    m = ArModel([1.34350288, -0.9025], 1.0)
    np.testing.assert_allclose(m.whitening_filter(), [1.0, -1.34350288, 0.9025])
    assert m.is_stable()
    assert not ArModel([2.0], 1.0).is_stable()
    with pytest.raises(ValueError):
        ArModel([0.1], 0.0)


# -- cepstra --------------------------------------------------------------------------------

def test_ar_cepstrum_white():
    c = ar_cepstrum(ArModel(np.zeros(3), 1.0), 6).coeffs
    np.testing.assert_array_equal(c, 0.0)


def test_ar_cepstrum_ar1_closed_form():
    c = ar_cepstrum(ArModel([0.5], 1.0), 6).coeffs
    q = np.arange(1, 6)
    np.testing.assert_allclose(c[1:], 0.5 ** q / q, rtol=1e-14)
    assert c[3] == pytest.approx(0.041666, abs=1e-5)


def test_ar_cepstrum_matches_log_spectrum_idft(rng):
    # random stable AR(4) from poles
    radii, angles = rng.uniform(0.5, 0.9, 2), rng.uniform(0.3, 2.8, 2)
    poly = np.array([1.0])
    for r, th in zip(radii, angles):
        poly = np.convolve(poly, [1.0, -2 * r * math.cos(th), r * r])
    m = ArModel(-poly[1:], 1.7)
    nfft = 4096
    spectrum = m.residual_variance / np.abs(np.fft.fft(poly, nfft)) ** 2
    # power cepstrum c_q of ln S, halved to match the one-sided convention
    oracle = np.fft.ifft(np.log(spectrum)).real
    c = ar_cepstrum(m, 12).coeffs
    assert c[0] == pytest.approx(oracle[0], abs=1e-3)
    np.testing.assert_allclose(c[1:], oracle[1:12], atol=1e-3)


def test_mel_scale_round_trip():
    f = np.array([0.0, 100.0, 1000.0, 4000.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
    assert hz_to_mel(1000.0) == pytest.approx(999.99, abs=0.1)


def test_filterbank_rows_non_empty():
    freqs = np.arange(1, 129) * FS / 256
    bank = mel_filterbank(40, freqs, FS)
    assert bank.shape == (40, 128)
    assert np.all(bank.sum(axis=1) > 0)
    assert bank.max() <= 1.0


def test_msfb_white_noise_flat():
    # variance 100 so that c_0 = sqrt(24) ln 100 is well away from zero
    x = Signal(10.0 * np.random.default_rng(8).standard_normal(50_000), FS)
    c = msfb_cepstrum(x, 24, 12).coeffs
    assert c[0] == pytest.approx(math.sqrt(24) * math.log(100.0), rel=0.02)
    assert np.all(np.abs(c[1:]) < 0.05 * abs(c[0]))


def test_msfb_distinguishes_vowels():
    a = ar_signal([1.3, -0.8], 8000, 9)
    b = ar_signal([-0.4, -0.7], 8000, 9)
    ca, cb = msfb_cepstrum(a).coeffs, msfb_cepstrum(b).coeffs
    assert np.linalg.norm(ca - cb) > 0.5
    with pytest.raises(ValueError):
        msfb_cepstrum(a, 8, 12)


def test_extractors_deterministic(rng):
    x = Signal(rng.standard_normal(4000), FS)
    for f in (lambda: estimate_autocorr_matrix(x, 10).matrix, lambda: estimate_psd(x).bins,
              lambda: fit_ar_burg(x, 8).coeffs, lambda: msfb_cepstrum(x).coeffs):
        np.testing.assert_array_equal(f(), f())
