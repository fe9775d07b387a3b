"""Recognition trials, parameter sweeps and the five-method comparison.

Every random draw comes from ``numpy.random.SeedSequence`` keyed by the
base seed plus (word, trial, stream) indices, so results do not depend on
evaluation order.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dictionary import (METHODS, Dictionary, build_dictionary, method_params, recognize)
from .errors import KlasrError
from .signal_io import ALIGN_POLICIES, align_length
from .synth import (DEFAULT_SEED, DEFAULT_UTTERANCE_LEN, REFERENCE_CORPUS, CorpusSpec,
                    add_noise, synth_segmented_utterance)

# stream ids for SeedSequence keys
_PROTO, _SIGNAL, _NOISE, _LENGTH, _PROTO_NOISE = 0, 1, 2, 3, 4

# Parameter grids.  FIGURE_GRIDS are the three single-method sweeps; the
# comparison grids have six points per method, indexed 1..6 as the
# "relative parameter" of the comparison table.
FIGURE_GRIDS = {
    "correlation": ("order", (5, 10, 15, 20, 25, 30, 40)),
    "spectral": ("window_len", (32, 64, 128, 256, 512, 1024)),
    "filter": ("order", (5, 10, 20, 30, 40, 50, 60)),
}
COMPARISON_GRIDS = {
    "correlation": ("order", (5, 10, 15, 20, 25, 30)),
    "spectral": ("window_len", (32, 64, 128, 256, 512, 1024)),
    "filter": ("order", (5, 10, 20, 30, 40, 50)),
    "cepstral": ("order", (4, 8, 12, 16, 20, 24)),
    "msfb": ("n_ceps", (4, 6, 8, 10, 12, 16)),
}


@dataclass(frozen=True)
class TrialConfig:
    """One recognition experiment.

    Prototypes (one per word) have exactly ``utterance_len`` samples; with
    ``noisy_prototypes`` they pass through the same noise channel as the
    trials, at ``snr_db`` with their own noise draw.
    ``trial_source="prototype"`` re-recognizes the training prototypes
    instead of fresh utterances.  ``align_policy="truncate_pad"`` aligns every
    trial utterance to ``utterance_len`` before recognition.
    """

    method: str = "correlation"
    method_params: dict = field(default_factory=dict)
    statistic_form: str = "full_kl"
    n_words: int = 10
    trials_per_word: int = 100
    snr_db: float = 18.0
    length_jitter_fraction: float = 0.2
    utterance_len: int = DEFAULT_UTTERANCE_LEN
    rng_seed: int = DEFAULT_SEED
    corpus: CorpusSpec = REFERENCE_CORPUS
    align_policy: str = "none"
    trial_source: str = "fresh"
    noisy_prototypes: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.trials_per_word < 1:
            raise ValueError("trials_per_word must be >= 1")
        if self.length_jitter_fraction < 0 or self.length_jitter_fraction >= 1:
            raise ValueError("length_jitter_fraction must be in [0, 1)")
        if self.n_words < 1 or self.n_words > self.corpus.n_words:
            raise ValueError(f"n_words must be in 1..{self.corpus.n_words}")
        if self.trial_source not in ("fresh", "prototype"):
            raise ValueError(f"unknown trial_source {self.trial_source!r}")
        method_params(self.method, self.method_params)

    def with_params(self, **kw) -> "TrialConfig":
        p = dict(self.method_params)
        p.update(kw)
        return replace(self, method_params=p)

    def echo(self) -> dict:
        d = asdict(self)
        d["corpus"] = asdict(self.corpus)
        d["method_params"] = method_params(self.method, self.method_params)
        return d


@dataclass(frozen=True, eq=False)
class EvalReport:
    labels: tuple
    confusion: np.ndarray
    config: TrialConfig

    @property
    def k_tot(self) -> int:
        return int(self.confusion.sum())

    @property
    def k_corr(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def w(self) -> float:
        return self.k_corr / self.k_tot

    @property
    def per_word_accuracy(self) -> dict:
        rows = self.confusion.sum(axis=1)
        return {lb: float(self.confusion[i, i] / rows[i]) for i, lb in enumerate(self.labels)}

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["label", "predicted_label", "count"])
        for i, a in enumerate(self.labels):
            for j, b in enumerate(self.labels):
                wr.writerow([a, b, int(self.confusion[i, j])])
        return buf.getvalue()


def _seed(cfg: TrialConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.rng_seed, *key])


@functools.lru_cache(maxsize=16)
def _corpus_models(corpus: CorpusSpec):
    return tuple(corpus.models())


def word_models(cfg: TrialConfig):
    return list(_corpus_models(cfg.corpus)[:cfg.n_words])


def prototypes(cfg: TrialConfig):
    """One training utterance per word, exactly ``utterance_len`` samples, no jitter."""
    out = []
    for i, (label, models) in enumerate(word_models(cfg)):
        s = synth_segmented_utterance(models, cfg.utterance_len, _seed(cfg, i, 0, _PROTO))
        if cfg.noisy_prototypes and not math.isinf(cfg.snr_db):
            s = add_noise(s, cfg.snr_db, _seed(cfg, i, 0, _PROTO_NOISE))
        out.append((label, s))
    return out


def trial_signal(cfg: TrialConfig, word: int, trial: int, models, proto=None):
    """Utterance for one trial: fresh realization, jittered length, additive noise."""
    if cfg.trial_source == "prototype":
        s = proto
        if cfg.length_jitter_fraction > 0:
            rng = np.random.default_rng(_seed(cfg, word, trial, _LENGTH))
            f = rng.uniform(1 - cfg.length_jitter_fraction, 1 + cfg.length_jitter_fraction)
            n = min(len(s), int(round(cfg.utterance_len * f)))
            s = s.replace(s.samples[:n])
    else:
        rng = np.random.default_rng(_seed(cfg, word, trial, _LENGTH))
        f = rng.uniform(1 - cfg.length_jitter_fraction, 1 + cfg.length_jitter_fraction)
        n = int(round(cfg.utterance_len * f))
        s = synth_segmented_utterance(models, n, _seed(cfg, word, trial, _SIGNAL))
    if not math.isinf(cfg.snr_db):
        s = add_noise(s, cfg.snr_db, _seed(cfg, word, trial, _NOISE))
    return align_length(s, cfg.utterance_len, cfg.align_policy)


def build_reference(cfg: TrialConfig, protos=None) -> Dictionary:
    protos = protos if protos is not None else prototypes(cfg)
    return build_dictionary(protos, cfg.method, cfg.method_params)


def run_trials(cfg: TrialConfig, dictionary: Dictionary | None = None) -> EvalReport:
    """Build from the prototypes, recognize ``trials_per_word`` utterances per word."""
    protos = prototypes(cfg)
    d = dictionary if dictionary is not None else build_reference(cfg, protos)
    models = word_models(cfg)
    r = len(models)
    confusion = np.zeros((r, r), dtype=np.int64)
    for i, (label, segs) in enumerate(models):
        for t in range(cfg.trials_per_word):
            try:
                s = trial_signal(cfg, i, t, segs, protos[i][1])
                res = recognize(s, d, cfg.statistic_form)
            except (KlasrError, ValueError) as exc:
                raise type(exc)(f"trial {t} of word {label!r}: {exc}") from exc
            confusion[i, res.winner_index] += 1
    return EvalReport(tuple(lb for lb, _ in models), confusion, cfg)


def compare_alignment(cfg: TrialConfig):
    """``{policy: EvalReport}`` for every alignment policy, all else equal."""
    return {policy: run_trials(replace(cfg, align_policy=policy)) for policy in ALIGN_POLICIES}


def sweep_parameter(cfg: TrialConfig, param_name: str, values):
    """``[(value, EvalReport), ...]`` with every other setting held fixed."""
    known = method_params(cfg.method)
    if param_name not in known:
        raise ValueError(f"{param_name!r} is not a parameter of method {cfg.method}; "
                         f"valid: {sorted(known)}")
    return [(v, run_trials(cfg.with_params(**{param_name: v}))) for v in values]


def sweep_seeds(cfg: TrialConfig, param_name: str, values, seeds):
    """Mean ``w`` per grid value over several base seeds."""
    table = np.array([[rep.w for _, rep in sweep_parameter(replace(cfg, rng_seed=sd),
                                                          param_name, values)]
                      for sd in seeds])
    return list(zip(values, table.mean(axis=0)))


def compare_methods(cfg: TrialConfig, grids=None, seeds=None):
    """Comparison table: one row per relative parameter index, one column per method.

    Returns ``[(relative_param, {method: w}), ...]`` where ``w`` is averaged
    over ``seeds`` (default: just ``cfg.rng_seed``).
    """
    grids = grids or COMPARISON_GRIDS
    seeds = seeds or (cfg.rng_seed,)
    cols = {}
    for method, (name, values) in grids.items():
        mcfg = replace(cfg, method=method, method_params={})
        cols[method] = [w for _, w in sweep_seeds(mcfg, name, values, seeds)]
    n_rows = max(len(v) for v in cols.values())
    return [(i + 1, {m: (cols[m][i] if i < len(cols[m]) else float("nan")) for m in grids})
            for i in range(n_rows)]


# -- CSV writers ----------------------------------------------------------------------

def _fmt(w: float) -> str:
    return f"{w:.6f}"


def sweep_csv(rows) -> str:
    """``rows`` as returned by :func:`sweep_parameter`."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["param", "w", "k_corr", "k_tot"])
    for value, rep in rows:
        wr.writerow([value, _fmt(rep.w), rep.k_corr, rep.k_tot])
    return buf.getvalue()


def comparison_csv(table, methods=METHODS) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["relative_param", *methods])
    for rel, ws in table:
        wr.writerow([rel, *(_fmt(ws[m]) for m in methods)])
    return buf.getvalue()
