"""Signal container, raw PCM / WAV readers and writers, preprocessing."""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, SignalError

FORMATS = ("pcm8", "pcm16", "wav")
ALIGN_POLICIES = ("none", "truncate_pad")


@dataclass(frozen=True, eq=False)
class Signal:
    """Immutable sampled waveform.  ``samples`` is a read-only float64 array."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).ravel()
        if x.size == 0:
            raise SignalError("signal is empty")
        if not np.all(np.isfinite(x)):
            raise SignalError("signal contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate_hz}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.samples, other.samples))

    def replace(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class PreprocessConfig:
    remove_dc: bool = True
    normalize_variance: bool = True
    min_length_samples: int = 2

    def __post_init__(self):
        if self.min_length_samples < 2:
            raise ValueError("min_length_samples must be >= 2")


DEFAULT_PREPROCESS = PreprocessConfig()


# -- decoding -----------------------------------------------------------------

def _decode_pcm8(raw: bytes) -> np.ndarray:
    return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0


def _decode_pcm16(raw: bytes) -> np.ndarray:
    if len(raw) % 2:
        raise FormatError("16-bit PCM payload has odd byte count")
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def _encode_pcm8(x: np.ndarray) -> bytes:
    q = np.clip(np.round(np.asarray(x) * 128.0 + 128.0), 0, 255)
    return q.astype(np.uint8).tobytes()


def _encode_pcm16(x: np.ndarray) -> bytes:
    q = np.clip(np.round(np.asarray(x) * 32768.0), -32768, 32767)
    return q.astype("<i2").tobytes()


def load_signal(path, format: str = "wav", sample_rate_hz: int | None = None) -> Signal:
    """Read a mono signal.

    ``pcm8`` is unsigned with offset 128, ``pcm16`` signed little-endian;
    both map to ``[-1, 1)`` and need ``sample_rate_hz``.  WAV files must be
    mono uncompressed PCM, 8 or 16 bit, and carry their own rate.
    """
    if format not in FORMATS:
        raise FormatError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    try:
        if format == "wav":
            return _load_wav(path)
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if sample_rate_hz is None or sample_rate_hz <= 0:
        raise FormatError("raw PCM needs a positive sample rate")
    if not raw:
        raise FormatError(f"{path}: zero-length payload")
    x = _decode_pcm8(raw) if format == "pcm8" else _decode_pcm16(raw)
    return Signal(x, sample_rate_hz)


def _load_wav(path: Path) -> Signal:
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    if channels != 1:
        raise FormatError(f"{path}: expected mono, found {channels} channels")
    if not raw:
        raise FormatError(f"{path}: zero-length payload")
    if width == 1:
        x = _decode_pcm8(raw)
    elif width == 2:
        x = _decode_pcm16(raw)
    else:
        raise FormatError(f"{path}: unsupported sample width {8 * width} bits")
    return Signal(x, rate)


def save_signal(s: Signal, path, format: str = "wav", bits: int = 16) -> None:
    """Write ``s``; samples outside ``[-1, 1)`` are clipped by quantization."""
    if format not in FORMATS:
        raise FormatError(f"unknown format {format!r}")
    if format == "pcm8" or (format == "wav" and bits == 8):
        raw, width = _encode_pcm8(s.samples), 1
    elif format == "pcm16" or (format == "wav" and bits == 16):
        raw, width = _encode_pcm16(s.samples), 2
    else:
        raise FormatError(f"unsupported bit depth {bits}")
    path = Path(path)
    if format != "wav":
        path.write_bytes(raw)
        return
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(width)
        wf.setframerate(s.sample_rate_hz)
        wf.writeframes(raw)


# -- preprocessing ------------------------------------------------------------

def preprocess(s: Signal, cfg: PreprocessConfig = DEFAULT_PREPROCESS) -> Signal:
    """Remove DC and/or scale to unit variance.

    Raises
    ------
    SignalError
        If the signal is shorter than ``cfg.min_length_samples`` or has zero
        variance while ``normalize_variance`` is set.
    """
    x = s.samples
    if x.shape[0] < cfg.min_length_samples:
        raise SignalError(
            f"signal has {x.shape[0]} samples, need at least {cfg.min_length_samples}")
    if cfg.remove_dc:
        x = x - x.mean()
        # a second pass mops up rounding left by the first
        x = x - x.mean()
    if cfg.normalize_variance:
        var = x.var()
        scale = max(np.abs(s.samples).max(), 1e-300)
        if not var > (1e-15 * scale) ** 2:
            raise SignalError("signal has zero variance (silence)")
        x = x / np.sqrt(var)
    return s.replace(x)


def align_length(s: Signal, target_len: int, policy: str = "none") -> Signal:
    """Center-truncate or symmetrically zero-pad to ``target_len``.

    With odd surplus the extra sample is dropped from (or padded at) the end.
    """
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    if policy not in ALIGN_POLICIES:
        raise ValueError(f"unknown alignment policy {policy!r}")
    n = len(s)
    if policy == "none" or n == target_len:
        return s
    if n > target_len:
        start = (n - target_len) // 2
        return s.replace(s.samples[start:start + target_len])
    pad = target_len - n
    left = pad // 2
    return s.replace(np.pad(s.samples, (left, pad - left)))
