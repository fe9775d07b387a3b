"""Synthetic AR "words": formant-like pole pairs driven by white noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import NumericalError, SignalError
from .features import ArModel
from .signal_io import Signal

SAMPLE_RATE_HZ = 8000
DEFAULT_SEED = 20050601
DEFAULT_UTTERANCE_LEN = 4000
WORD_LABELS = ("zero", "one", "two", "three", "four",
               "five", "six", "seven", "eight", "nine",
               "ten", "eleven", "twelve", "thirteen", "fourteen")


@dataclass(frozen=True)
class SynthWordSpec:
    """Pole pairs ``r·exp(±iθ)`` of one word.  ``ar_order`` is ``2 * len(pole_radii)``."""

    seed: int
    pole_radii: tuple
    pole_angles: tuple

    def __post_init__(self):
        if len(self.pole_radii) != len(self.pole_angles):
            raise ValueError("pole_radii and pole_angles differ in length")
        object.__setattr__(self, "pole_radii", tuple(float(r) for r in self.pole_radii))
        object.__setattr__(self, "pole_angles", tuple(float(t) for t in self.pole_angles))

    @property
    def ar_order(self) -> int:
        return 2 * len(self.pole_radii)

    @classmethod
    def random(cls, seed: int, n_pairs: int = 5, radius_range=(0.90, 0.98),
               angle_range=(0.05 * math.pi, 0.95 * math.pi)) -> "SynthWordSpec":
        """Draw ``n_pairs`` resonances with sorted angles, reproducibly from ``seed``."""
        rng = np.random.default_rng(seed)
        radii = rng.uniform(*radius_range, size=n_pairs)
        angles = np.sort(rng.uniform(*angle_range, size=n_pairs))
        return cls(seed, tuple(radii), tuple(angles))


def poly_from_poles(radii, angles) -> np.ndarray:
    """Monic polynomial ``1 + c_1 z^-1 + ...`` with the given conjugate pole pairs."""
    poly = np.ones(1)
    for r, th in zip(radii, angles):
        poly = np.convolve(poly, [1.0, -2.0 * r * math.cos(th), r * r])
    return poly


def synth_word_model(spec: SynthWordSpec) -> ArModel:
    """Predictor coefficients of the all-pole filter with the spec's poles, unit excitation."""
    for r in spec.pole_radii:
        if not 0.0 < r < 1.0:
            raise NumericalError(f"pole radius {r} is not inside the unit circle")
    poly = poly_from_poles(spec.pole_radii, spec.pole_angles)
    return ArModel(-poly[1:], 1.0)


def synth_utterance(model: ArModel, length: int, rng_seed,
                    sample_rate_hz: int = SAMPLE_RATE_HZ) -> Signal:
    """Drive ``model`` with Gaussian white noise; the first ``10 * order`` samples are discarded."""
    if length <= model.order:
        raise SignalError(f"length {length} must exceed the model order {model.order}")
    if not model.is_stable():
        raise NumericalError("AR model is unstable")
    rng = np.random.default_rng(rng_seed)
    burn = 10 * model.order
    e = rng.standard_normal(length + burn) * math.sqrt(model.residual_variance)
    x = lfilter([1.0], model.whitening_filter(), e)
    return Signal(x[burn:], sample_rate_hz)


def synth_segmented_utterance(models, length: int, rng_seed,
                              sample_rate_hz: int = SAMPLE_RATE_HZ) -> Signal:
    """Concatenate equal-length stretches generated by successive models."""
    models = list(models)
    if len(models) == 1:
        return synth_utterance(models[0], length, rng_seed, sample_rate_hz)
    if isinstance(rng_seed, np.random.SeedSequence):
        ss = rng_seed
    else:
        ss = np.random.SeedSequence(rng_seed if isinstance(rng_seed, (list, tuple)) else [rng_seed])
    bounds = np.linspace(0, length, len(models) + 1).round().astype(int)
    parts = [synth_utterance(m, int(hi - lo), child, sample_rate_hz).samples
             for m, lo, hi, child in zip(models, bounds[:-1], bounds[1:], ss.spawn(len(models)))]
    return Signal(np.concatenate(parts), sample_rate_hz)


def add_noise(s: Signal, snr_db: float, rng_seed, return_noise: bool = False):
    """Add white Gaussian noise at exactly ``snr_db`` (by mean-square power).

    The drawn noise is rescaled so its sample power hits the target, which
    makes the realized SNR exact rather than exact-in-expectation.
    ``snr_db = inf`` returns ``s`` untouched.
    """
    x = s.samples
    if math.isinf(snr_db) and snr_db > 0:
        return (s, np.zeros_like(x)) if return_noise else s
    power = float(np.mean((x - x.mean()) ** 2))
    if not power > 0.0:
        raise SignalError("cannot set an SNR on a zero-variance signal")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(x.shape[0])
    noise *= math.sqrt(power / 10.0 ** (snr_db / 10.0) / np.mean(noise ** 2))
    out = s.replace(x + noise)
    return (out, noise) if return_noise else out


def model_spectrum(model: ArModel, n_freq: int = 1024) -> np.ndarray:
    """Power spectrum of ``model`` on ``n_freq`` points over ``[0, pi)``."""
    w = np.arange(n_freq) * (np.pi / n_freq)
    a = np.polyval(model.whitening_filter()[::-1], np.exp(-1j * w))
    return model.residual_variance / np.abs(a) ** 2


def kl_rate(s_x: np.ndarray, s_r: np.ndarray) -> float:
    """Per-sample KL divergence rate between Gaussian processes with spectra ``s_x``, ``s_r``."""
    t = s_x / s_r
    return 0.5 * float(np.mean(t - np.log(t) - 1.0))


def separation(m1: ArModel, m2: ArModel, floor_db: float = 18.0) -> float:
    """Symmetric KL rate between two word models, both scaled to unit power and
    given a white floor ``floor_db`` below it, as seen through a noisy channel."""
    s1 = model_spectrum(m1)
    s2 = model_spectrum(m2)
    floor = 10.0 ** (-floor_db / 10.0)
    s1 = s1 / s1.mean() + floor
    s2 = s2 / s2.mean() + floor
    return min(kl_rate(s1, s2), kl_rate(s2, s1))


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for a single-speaker family of synthetic words.

    A base set of ``n_formants`` resonances (angles over ``angle_range``,
    radii over ``radius_range``) stands for the speaker's vocal tract.  Each
    word keeps 4 or 5 of them (``pairs_per_word``) and perturbs every kept
    angle by ``N(0, angle_spread)`` radians and radius by
    ``N(0, radius_spread)``, clipped back into the ranges.  A candidate word
    closer than ``min_separation`` (see :func:`separation`) to an earlier
    word is redrawn.  ``segments > 1`` gives each word that many
    consecutive AR regimes, each drawn the same way.
    """

    n_words: int = 10
    seed: int = DEFAULT_SEED
    n_formants: int = 5
    pairs_per_word: tuple = (4, 5)
    radius_range: tuple = (0.90, 0.98)
    angle_range: tuple = (0.08 * math.pi, 0.92 * math.pi)
    angle_spread: float = 0.02
    radius_spread: float = 0.01
    min_separation: float = 0.01
    separation_floor_db: float = 18.0
    segments: int = 1
    max_draws: int = 1000
    labels: tuple = field(default=WORD_LABELS)

    def _draw_segment(self, rng, base_r, base_th) -> SynthWordSpec:
        lo, hi = self.pairs_per_word
        k = int(rng.integers(lo, hi + 1))
        idx = np.sort(rng.choice(self.n_formants, size=min(k, self.n_formants), replace=False))
        th = np.clip(base_th[idx] + rng.normal(0.0, self.angle_spread, idx.size),
                     *self.angle_range)
        r = np.clip(base_r[idx] + rng.normal(0.0, self.radius_spread, idx.size),
                    *self.radius_range)
        return SynthWordSpec(int(rng.integers(0, 2**31 - 1)), tuple(r), tuple(th))

    def word_specs(self):
        """``[(label, (SynthWordSpec, ...)), ...]``, deterministic in ``seed``."""
        if self.n_words > len(self.labels):
            raise ValueError(f"at most {len(self.labels)} words have labels")
        rng = np.random.default_rng(self.seed)
        base_r = rng.uniform(*self.radius_range, size=self.n_formants)
        base_th = np.sort(rng.uniform(*self.angle_range, size=self.n_formants))
        words, accepted = [], []
        for i in range(self.n_words):
            for _ in range(self.max_draws):
                segs = tuple(self._draw_segment(rng, base_r, base_th)
                             for _ in range(self.segments))
                models = [synth_word_model(sp) for sp in segs]
                if all(min(separation(m, o, self.separation_floor_db)
                           for m in models for o in prev) >= self.min_separation
                       for prev in accepted):
                    break
            else:
                raise ValueError(f"could not draw word {i} at min_separation={self.min_separation}")
            accepted.append(models)
            words.append((self.labels[i], segs))
        return words

    def models(self):
        """``[(label, (ArModel, ...)), ...]`` in word order."""
        return [(label, tuple(synth_word_model(sp) for sp in specs))
                for label, specs in self.word_specs()]


REFERENCE_CORPUS = CorpusSpec()
