"""Reference dictionaries: training, KLDB persistence, recognition.

KLDB layout (little-endian throughout)::

    b"KLDB"  u32 version  u8 method-tag
    params block (training side)  params block (recognition side)
    u32 R
    R x { u32 label-bytes, UTF-8 label, u32 n, n x f64 }

A params block is ``u16 count`` followed by ``count`` records of
``u8 key-bytes, key, u8 type`` and a value: type 0 is f64, 1 is i64,
2 is ``u16 bytes`` + UTF-8 text.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import features as fe
from .divergence import (CEPSTRAL_WEIGHTINGS, CorrelationTemplate, STATISTIC_FORMS, dist_cepstral, dist_euclid,
                         make_correlation_template, stat_correlation, stat_filter,
                         stat_spectral)
from .errors import FormatError, KlasrError, NumericalError
from .linalg import log_det, lu_decompose
from .signal_io import PreprocessConfig, Signal, preprocess

MAGIC = b"KLDB"
FORMAT_VERSION = 1
METHODS = ("correlation", "spectral", "filter", "cepstral", "msfb")
LID_METHODS = METHODS[:3]
BASELINE_METHODS = METHODS[3:]
METHOD_TAGS = {m: i for i, m in enumerate(METHODS)}

# Training-side defaults.  ``order`` is the matrix order for correlation
# and the AR order for filter/cepstral.
DEFAULT_PARAMS = {
    "correlation": {"order": 20, "regularization": fe.DEFAULT_REGULARIZATION},
    "spectral": {"window_len": 256, "overlap": fe.DEFAULT_PSD_OVERLAP},
    "filter": {"order": 30, "normalization": "innovation"},
    "cepstral": {"order": 12, "n_ceps": 16, "weighting": "index"},
    "msfb": {"n_filters": 24, "n_ceps": 12, "window_len": 256, "overlap": fe.DEFAULT_PSD_OVERLAP},
}
# Keys the recognition side must share with training, per method.
LOCKED_KEYS = {
    "correlation": ("order",),
    "spectral": ("window_len",),
    "filter": (),
    "cepstral": ("n_ceps", "weighting"),
    "msfb": ("n_filters", "n_ceps", "window_len"),
}
FILTER_NORMALIZATIONS = ("innovation", "variance")
INT_KEYS = {"order", "window_len", "n_ceps", "n_filters", "remove_dc", "normalize_variance"}


class DictionaryError(KlasrError, ValueError):
    pass


def method_params(method: str, params=None, **overrides) -> dict:
    """Defaults for ``method`` merged with ``params`` and keyword overrides."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    out = dict(DEFAULT_PARAMS[method])
    out.update({"remove_dc": 1, "normalize_variance": 1})
    for src in (params or {}), overrides:
        for k, v in src.items():
            if k not in out:
                raise ValueError(f"unknown parameter {k!r} for method {method}")
            out[k] = int(v) if k in INT_KEYS else v
    _validate_params(method, out)
    return out


def _validate_params(method, p):
    if "order" in p and p["order"] < 1:
        raise ValueError("order must be >= 1")
    if "window_len" in p:
        w = p["window_len"]
        if w < 2 or w & (w - 1):
            raise ValueError("window_len must be a power of two >= 2")
    if "n_ceps" in p and p["n_ceps"] < 1:
        raise ValueError("n_ceps must be >= 1")
    if p.get("normalization", "innovation") not in FILTER_NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {FILTER_NORMALIZATIONS}")
    if p.get("weighting", "index") not in CEPSTRAL_WEIGHTINGS:
        raise ValueError(f"weighting must be one of {CEPSTRAL_WEIGHTINGS}")
    if method == "msfb" and p["n_filters"] < p["n_ceps"]:
        raise ValueError("n_filters must be >= n_ceps")


def preprocess_config(params) -> PreprocessConfig:
    return PreprocessConfig(bool(params.get("remove_dc", 1)),
                            bool(params.get("normalize_variance", 1)))


# -- feature extraction per method ---------------------------------------------------

def extract_features(method: str, s: Signal, params: dict):
    """Dictionary-side feature (FE_y) for one word."""
    if method == "correlation":
        k = fe.estimate_autocorr_matrix(s, params["order"], params["regularization"])
        return make_correlation_template(k)
    if method == "spectral":
        return fe.estimate_psd(s, params["window_len"], params["overlap"])
    if method == "filter":
        return fe.fit_ar_burg(s, params["order"])
    if method == "cepstral":
        return fe.ar_cepstrum(fe.fit_ar_burg(s, params["order"]), params["n_ceps"])
    if method == "msfb":
        return fe.msfb_cepstrum(s, params["n_filters"], params["n_ceps"], params["window_len"],
                                params["overlap"])
    raise ValueError(f"unknown method {method!r}")


def _feature_vector(method, feat) -> np.ndarray:
    if method == "correlation":
        return np.concatenate((feat.inverse_matrix.ravel(), [feat.log_det_r]))
    if method == "spectral":
        return feat.bins
    if method == "filter":
        return np.concatenate((feat.coeffs, [feat.residual_variance]))
    return feat.coeffs


def _feature_from_vector(method, vec: np.ndarray, params):
    n = vec.shape[0]
    if method == "correlation":
        p = params["order"]
        if n != p * p + 1:
            raise FormatError(f"correlation payload has {n} values, expected {p * p + 1}")
        return CorrelationTemplate(vec[:-1].reshape(p, p).copy(), float(vec[-1]))
    if method == "spectral":
        if n != params["window_len"] // 2:
            raise FormatError(f"spectral payload has {n} bins, expected {params['window_len'] // 2}")
        return fe.Psd(vec.copy(), params["window_len"], params["sample_rate_hz"])
    if method == "filter":
        if n != params["order"] + 1:
            raise FormatError(f"filter payload has {n} values, expected {params['order'] + 1}")
        if not vec[-1] > 0:
            raise FormatError("filter payload has non-positive residual variance")
        return fe.ArModel(vec[:-1].copy(), float(vec[-1]))
    if n != params["n_ceps"]:
        raise FormatError(f"cepstral payload has {n} values, expected {params['n_ceps']}")
    kind = "ar_cepstrum" if method == "cepstral" else "msfb_cepstrum"
    return fe.CepstralVector(vec.copy(), kind)


@dataclass(frozen=True, eq=False)
class Dictionary:
    method: str
    params: dict
    labels: tuple
    features: tuple
    recognition_params: dict = field(default=None)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.method not in METHODS:
            raise DictionaryError(f"unknown method {self.method!r}")
        if not self.labels:
            raise DictionaryError("dictionary has no entries")
        if len(set(self.labels)) != len(self.labels):
            raise DictionaryError("dictionary labels must be unique")
        if len(self.labels) != len(self.features):
            raise DictionaryError("labels and features differ in length")
        if self.recognition_params is None:
            object.__setattr__(self, "recognition_params", dict(self.params))
        check_compatible(self.method, self.params, self.recognition_params)

    def __len__(self):
        return len(self.labels)

    @property
    def entries(self):
        return list(zip(self.labels, self.features))

    def with_recognition_params(self, **kw) -> "Dictionary":
        rp = dict(self.recognition_params)
        for k, v in kw.items():
            rp[k] = int(v) if k in INT_KEYS else v
        return Dictionary(self.method, self.params, self.labels, self.features, rp)

    def subset(self, indices) -> "Dictionary":
        idx = list(indices)
        return Dictionary(self.method, self.params, tuple(self.labels[i] for i in idx),
                          tuple(self.features[i] for i in idx), self.recognition_params)


def check_compatible(method, train_params, recog_params):
    """Recognition-side params may differ from training only where dimensions allow.

    The correlation method is equal-order-only: ``K_x`` and ``K_r^-1`` must
    have the same shape.
    """
    for key in LOCKED_KEYS[method]:
        if train_params.get(key) != recog_params.get(key):
            raise DictionaryError(
                f"{method}: recognition {key}={recog_params.get(key)!r} differs from "
                f"training {key}={train_params.get(key)!r}")


def build_dictionary(corpus, method: str, params=None) -> Dictionary:
    """Extract and store one reference feature per ``(label, Signal)``.

    Raises
    ------
    DictionaryError
        On an empty corpus, duplicate labels, or a failing entry (the label
        is named in the message).
    """
    corpus = list(corpus)
    if not corpus:
        raise DictionaryError("corpus is empty")
    labels = tuple(label for label, _ in corpus)
    if len(set(labels)) != len(labels):
        dupes = sorted({lb for lb in labels if labels.count(lb) > 1})
        raise DictionaryError(f"duplicate labels: {', '.join(dupes)}")
    p = method_params(method, params)
    pre = preprocess_config(p)
    rates = {s.sample_rate_hz for _, s in corpus}
    if len(rates) != 1:
        raise DictionaryError(f"corpus mixes sample rates {sorted(rates)}")
    if method == "spectral":
        p["sample_rate_hz"] = rates.pop()
    feats = []
    for label, s in corpus:
        try:
            feats.append(extract_features(method, preprocess(s, pre), p))
        except (KlasrError, ValueError) as exc:
            raise type(exc)(f"entry {label!r}: {exc}") from exc
    return Dictionary(method, p, labels, tuple(feats))


# -- recognition ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RecognitionResult:
    scores: np.ndarray
    winner_index: int
    winner_label: str

    def ranking(self):
        """Entry indices by ascending score, ties by index."""
        return list(np.argsort(self.scores, kind="stable"))


def score_entries(x: Signal, d: Dictionary, form: str = "full_kl") -> np.ndarray:
    """One score per dictionary entry; lower means closer.  ``x`` is already preprocessed."""
    p = d.recognition_params
    m = d.method
    if m == "correlation":
        if form not in STATISTIC_FORMS:
            raise ValueError(f"unknown statistic form {form!r}")
        kx = fe.estimate_autocorr_matrix(x, p["order"], p["regularization"])
        ld_x, sign = log_det(lu_decompose(kx.matrix, pivoting=False))
        if sign <= 0:
            raise NumericalError("input autocorrelation matrix is not positive definite")
        return np.array([stat_correlation(kx, t, form, ld_x) for t in d.features])
    if m == "spectral":
        gx = fe.estimate_psd(x, p["window_len"], p["overlap"])
        gx = fe.Psd(gx.bins, gx.window_len, d.params["sample_rate_hz"])
        if x.sample_rate_hz != d.params["sample_rate_hz"]:
            raise DictionaryError(
                f"input rate {x.sample_rate_hz} Hz differs from dictionary rate "
                f"{d.params['sample_rate_hz']} Hz")
        return np.array([stat_spectral(gx, gr) for gr in d.features])
    if m == "filter":
        # "innovation": x and every template are scaled to unit excitation
        # variance, so the statistic sees s2_xr / s2_x against 1.
        if p["normalization"] == "innovation":
            s2_x = fe.fit_ar_burg(x, p["order"]).residual_variance
            return np.array([stat_filter(fe.whiten(x, ar) / s2_x, 1.0) for ar in d.features])
        return np.array([stat_filter(fe.whiten(x, ar), ar.residual_variance)
                         for ar in d.features])
    if m == "cepstral":
        cx = fe.ar_cepstrum(fe.fit_ar_burg(x, p["order"]), p["n_ceps"])
        return np.array([dist_cepstral(cx, cr, p["weighting"]) for cr in d.features])
    cx = fe.msfb_cepstrum(x, p["n_filters"], p["n_ceps"], p["window_len"], p["overlap"])
    return np.array([dist_euclid(cx, cr) for cr in d.features])


def recognize(s: Signal, d: Dictionary, form: str = "full_kl") -> RecognitionResult:
    """Score ``s`` against every entry and pick the argmin (lowest index on ties)."""
    x = preprocess(s, preprocess_config(d.recognition_params))
    scores = score_entries(x, d, form)
    win = int(np.argmin(scores))
    return RecognitionResult(scores, win, d.labels[win])


# -- persistence ---------------------------------------------------------------------

def _write_params(buf, params: dict):
    buf.write(struct.pack("<H", len(params)))
    for key in sorted(params):
        val = params[key]
        kb = key.encode("utf-8")
        buf.write(struct.pack("<B", len(kb)) + kb)
        if isinstance(val, str):
            vb = val.encode("utf-8")
            buf.write(struct.pack("<BH", 2, len(vb)) + vb)
        elif isinstance(val, (int, np.integer)) and not isinstance(val, bool):
            buf.write(struct.pack("<Bq", 1, int(val)))
        else:
            buf.write(struct.pack("<Bd", 0, float(val)))


def dumps_dictionary(d: Dictionary) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IB", FORMAT_VERSION, METHOD_TAGS[d.method]))
    _write_params(buf, d.params)
    _write_params(buf, d.recognition_params)
    buf.write(struct.pack("<I", len(d)))
    for label, feat in d.entries:
        lb = label.encode("utf-8")
        vec = np.ascontiguousarray(_feature_vector(d.method, feat), dtype="<f8")
        buf.write(struct.pack("<I", len(lb)) + lb)
        buf.write(struct.pack("<I", vec.shape[0]) + vec.tobytes())
    return buf.getvalue()


def save_dictionary(d: Dictionary, path) -> None:
    Path(path).write_bytes(dumps_dictionary(d))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated dictionary file while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _read_params(r: _Reader) -> dict:
    (count,) = r.unpack("<H", "params count")
    out = {}
    for _ in range(count):
        (klen,) = r.unpack("<B", "param key length")
        try:
            key = r.take(klen, "param key").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("corrupt parameter key") from exc
        (tag,) = r.unpack("<B", "param type")
        if tag == 0:
            (out[key],) = r.unpack("<d", key)
        elif tag == 1:
            (out[key],) = r.unpack("<q", key)
        elif tag == 2:
            (vlen,) = r.unpack("<H", key)
            try:
                out[key] = r.take(vlen, key).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"corrupt text value for {key}") from exc
        else:
            raise FormatError(f"unknown parameter type tag {tag}")
    return out


def loads_dictionary(data: bytes) -> Dictionary:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("not a KLDB dictionary (bad magic bytes)")
    version, tag = r.unpack("<IB", "header")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported KLDB version {version} (expected {FORMAT_VERSION})")
    if tag >= len(METHODS):
        raise FormatError(f"unknown method tag {tag}")
    method = METHODS[tag]
    params = _read_params(r)
    recog = _read_params(r)
    required = set(DEFAULT_PARAMS[method]) | ({"sample_rate_hz"} if method == "spectral" else set())
    if not required <= set(params):
        raise FormatError(f"missing parameters: {sorted(required - set(params))}")
    (count,) = r.unpack("<I", "entry count")
    if count == 0:
        raise FormatError("dictionary has no entries")
    labels, feats = [], []
    for i in range(count):
        (llen,) = r.unpack("<I", f"label length of entry {i}")
        try:
            labels.append(r.take(llen, f"label of entry {i}").decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"corrupt label in entry {i}") from exc
        (n,) = r.unpack("<I", f"payload size of entry {i}")
        vec = np.frombuffer(r.take(8 * n, f"payload of entry {i}"), dtype="<f8").astype(np.float64)
        feats.append(_feature_from_vector(method, vec, params))
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last entry")
    try:
        return Dictionary(method, params, tuple(labels), tuple(feats), recog)
    except DictionaryError as exc:
        raise FormatError(str(exc)) from exc


def load_dictionary(path) -> Dictionary:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return loads_dictionary(data)
