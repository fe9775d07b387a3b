"""``klasr`` command line: train, recognize, synth, eval, sweep, inspect.

Exit status: 0 success, 1 usage error, 2 data or format error, 3 numerical
failure.  ``KLASR_SEED`` supplies the default for ``--seed``.

Config files are flat ``key = value`` text; ``#`` starts a comment.  The
bundled defaults live in ``klasr/configs`` and are used when ``--config``
is omitted.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .dictionary import (DEFAULT_PARAMS, METHODS, MAGIC, Dictionary,
                         build_dictionary, load_dictionary, method_params, recognize,
                         save_dictionary)
from .divergence import STATISTIC_FORMS
from .errors import ConfigError, FormatError, KlasrError, NumericalError
from .evaluation import (COMPARISON_GRIDS, FIGURE_GRIDS, TrialConfig, compare_methods,
                         comparison_csv, compare_alignment, prototypes, sweep_csv, sweep_parameter,
                         trial_signal, word_models)
from .signal_io import ALIGN_POLICIES, Signal, load_signal, save_signal
from .synth import DEFAULT_SEED, CorpusSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
AUDIO_SUFFIXES = {".wav": "wav", ".pcm8": "pcm8", ".pcm16": "pcm16"}
MANIFEST = "manifest.csv"


class UsageError(KlasrError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; usage errors here are 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config files --------------------------------------------------------------------

def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip())


# key -> parser for every config key; which keys a command accepts is below
_CORPUS_KEYS = {
    "n_words": int,
    "corpus_seed": int,
    "corpus_angle_spread": float,
    "corpus_radius_spread": float,
    "corpus_min_separation": float,
    "corpus_segments": int,
    "utterance_len": int,
    "snr_db": float,
    "length_jitter_fraction": float,
    "seed": int,
}
_METHOD_PARAM_KEYS = {
    "order": int, "regularization": float, "window_len": int, "overlap": float,
    "normalization": str, "n_ceps": int, "weighting": str, "n_filters": int,
    "remove_dc": int, "normalize_variance": int,
}
_TRIAL_KEYS = {
    **_CORPUS_KEYS,
    "method": str,
    "statistic_form": str,
    "trials_per_word": int,
    "align_policy": str,
    "trial_source": str,
    "noisy_prototypes": _bool,
    **_METHOD_PARAM_KEYS,
}
CONFIG_KEYS = {
    "synth": {**_CORPUS_KEYS, "noisy_prototypes": _bool, "bits": int, "tests_per_word": int},
    "eval": _TRIAL_KEYS,
    "sweep": {**_TRIAL_KEYS, "grid": str, "param": str, "values": _floats, "seeds": _ints},
}


def parse_config(text: str, command: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines against the key set of ``command``."""
    schema = CONFIG_KEYS[command]
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; "
                              f"valid keys: {', '.join(sorted(schema))}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            out[key] = schema[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def bundled_config(command: str) -> str:
    return resources.files("klasr").joinpath("configs", f"{command}.cfg").read_text()


def load_config(path, command: str) -> dict:
    """Read ``path``; ``None`` means the bundled default, ``bundled:NAME`` a bundled file."""
    if path is None or path.startswith("bundled:"):
        name = command if path is None else path[len("bundled:"):]
        try:
            text = bundled_config(name)
        except (OSError, ValueError) as exc:
            raise FormatError(f"no bundled config {name!r}") from exc
        return parse_config(text, command, f"<bundled {name}.cfg>")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, command, str(path))


def resolve_seed(flag, cfg: dict) -> int:
    """``--seed``, then ``KLASR_SEED``, then the config's ``seed``, then the default."""
    if flag is not None:
        return flag
    env = os.environ.get("KLASR_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"KLASR_SEED is not an integer: {env!r}") from None
    return cfg.get("seed", DEFAULT_SEED)


def corpus_from_config(cfg: dict) -> CorpusSpec:
    kw = {}
    for key, field_name in (("n_words", "n_words"), ("corpus_seed", "seed"),
                            ("corpus_angle_spread", "angle_spread"),
                            ("corpus_radius_spread", "radius_spread"),
                            ("corpus_min_separation", "min_separation"),
                            ("corpus_segments", "segments")):
        if key in cfg:
            kw[field_name] = cfg[key]
    try:
        return CorpusSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def trial_config_from(cfg: dict, seed: int) -> TrialConfig:
    method = cfg.get("method", "correlation")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    valid = set(method_params(method))
    params = {k: v for k, v in cfg.items() if k in _METHOD_PARAM_KEYS}
    stray = sorted(set(params) - valid)
    if stray:
        raise ConfigError(f"{', '.join(stray)} not parameters of method {method}; "
                          f"valid: {', '.join(sorted(valid))}")
    kw = {k: cfg[k] for k in ("statistic_form", "trials_per_word", "snr_db",
                              "length_jitter_fraction", "utterance_len", "align_policy",
                              "trial_source", "noisy_prototypes") if k in cfg}
    if kw.get("statistic_form", "full_kl") not in STATISTIC_FORMS:
        raise ConfigError(f"statistic_form must be one of {STATISTIC_FORMS}")
    if kw.get("align_policy", "none") not in ALIGN_POLICIES:
        raise ConfigError(f"align_policy must be one of {ALIGN_POLICIES}")
    corpus = corpus_from_config(cfg)
    try:
        return TrialConfig(method=method, method_params=params, n_words=corpus.n_words,
                           rng_seed=seed, corpus=corpus, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- helpers -------------------------------------------------------------------------

def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _out_dir(path) -> Path:
    p = Path(path)
    if p.exists() and not p.is_dir():
        raise UsageError(f"{p} exists and is not a directory")
    return p


def _read_manifest(corpus_dir: Path):
    """``{filename: label}`` from ``manifest.csv`` if present."""
    path = corpus_dir / MANIFEST
    if not path.is_file():
        return {}
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"file", "label"} <= set(rows[0]):
        raise FormatError(f"{path}: needs 'file' and 'label' columns")
    return {r["file"]: r["label"] for r in rows}


def _corpus_files(corpus_dir: Path):
    files = sorted(p for p in corpus_dir.iterdir()
                   if p.is_file() and p.suffix.lower() in AUDIO_SUFFIXES)
    if not files:
        raise FormatError(f"{corpus_dir}: no corpus files (*.wav, *.pcm8, *.pcm16)")
    return files


def _feature_summary(method: str, feat) -> str:
    if method == "correlation":
        return f"order={feat.order} log_det={feat.log_det_r:.6g}"
    if method == "spectral":
        return f"bins={feat.bins.shape[0]} peak_hz={feat.frequencies()[np.argmax(feat.bins)]:.1f}"
    if method == "filter":
        return f"order={feat.order} residual_var={feat.residual_variance:.6g}"
    return f"n_ceps={len(feat)} c1={feat.coeffs[1] if len(feat) > 1 else feat.coeffs[0]:.6g}"


# -- commands ------------------------------------------------------------------------

def cmd_train(args) -> int:
    params = {}
    if args.order is not None:
        if args.order < 1:
            raise UsageError("--order must be >= 1")
        if "order" not in DEFAULT_PARAMS[args.method]:
            raise UsageError(f"--order does not apply to method {args.method}")
        params["order"] = args.order
    if args.window is not None:
        if args.window < 2 or args.window & (args.window - 1):
            raise UsageError("--window must be a power of two >= 2")
        if "window_len" not in DEFAULT_PARAMS[args.method]:
            raise UsageError(f"--window does not apply to method {args.method}")
        params["window_len"] = args.window
    for item in args.param or ():
        key, sep, value = item.partition("=")
        if not sep or key not in _METHOD_PARAM_KEYS:
            raise UsageError(f"--param expects key=value with key in "
                             f"{', '.join(sorted(_METHOD_PARAM_KEYS))}")
        try:
            params[key] = _METHOD_PARAM_KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"--param {key}: {exc}") from exc
    try:
        method_params(args.method, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    corpus_dir = Path(args.corpus_dir)
    if not corpus_dir.is_dir():
        raise FormatError(f"{corpus_dir}: not a directory")
    manifest = _read_manifest(corpus_dir)
    corpus, names = [], []
    for path in _corpus_files(corpus_dir):
        fmt = AUDIO_SUFFIXES[path.suffix.lower()]
        s = load_signal(path, fmt, args.sample_rate if fmt != "wav" else None)
        corpus.append((manifest.get(path.name, path.stem), s))
        names.append(path.name)
    try:
        d = build_dictionary(corpus, args.method, params)
    except (KlasrError, ValueError) as exc:
        # the message names the failing label; add its file
        files = [f"{n}" for (lb, _), n in zip(corpus, names) if f"entry {lb!r}" in str(exc)]
        raise type(exc)(f"{exc} [{files[0]}]" if files else str(exc)) from exc
    save_dictionary(d, args.out)
    for (label, s), name, feat in zip(corpus, names, d.features):
        print(f"{label}\t{name}\tn={len(s)}\t{_feature_summary(d.method, feat)}")
    print(f"wrote {args.out}: method={d.method} entries={len(d)}")
    return EXIT_OK


def _print_scores(res, d: Dictionary):
    print(res.winner_label)
    for i in res.ranking():
        print(f"{d.labels[i]} {res.scores[i]:.10g}")


def cmd_recognize(args) -> int:
    d = load_dictionary(args.dict)
    fmt = AUDIO_SUFFIXES.get(Path(args.input_file).suffix.lower(), "wav")
    s = load_signal(args.input_file, fmt, args.sample_rate if fmt != "wav" else None)
    if args.form != "full_kl" and d.method != "correlation":
        print("note: --form only affects the correlation method", file=sys.stderr)
    res = recognize(s, d, args.form)
    _print_scores(res, d)
    return EXIT_OK


def _peak_scaled(s: Signal) -> Signal:
    # leave headroom so quantization never clips; recognizers normalize variance anyway
    peak = float(np.max(np.abs(s.samples)))
    return s.replace(s.samples * (0.9 / peak)) if peak > 0 else s


def cmd_synth(args) -> int:
    cfg = load_config(args.config, "synth")
    seed = resolve_seed(args.seed, cfg)
    bits = cfg.get("bits", 16)
    if bits not in (8, 16):
        raise ConfigError("bits must be 8 or 16")
    corpus = corpus_from_config(cfg)
    kw = {k: cfg[k] for k in ("snr_db", "length_jitter_fraction", "utterance_len",
                              "noisy_prototypes") if k in cfg}
    try:
        tcfg = TrialConfig(n_words=corpus.n_words, rng_seed=seed, corpus=corpus, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, s in prototypes(tcfg):
        name = f"{label}.wav"
        save_signal(_peak_scaled(s), out / name, "wav", bits)
        rows.append((name, label, "prototype", len(s)))
    n_tests = cfg.get("tests_per_word", 0)
    if n_tests:
        (out / "test").mkdir(exist_ok=True)
        for i, (label, models) in enumerate(word_models(tcfg)):
            for t in range(n_tests):
                s = trial_signal(tcfg, i, t, models)
                name = f"test/{label}_{t:03d}.wav"
                save_signal(_peak_scaled(s), out / name, "wav", bits)
                rows.append((name, label, "test", len(s)))
    with (out / MANIFEST).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["file", "label", "role", "n_samples"])
        wr.writerows(rows)
    print(f"wrote {len(rows)} files to {out} (seed={seed})")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config, "eval")
    tcfg = trial_config_from(cfg, resolve_seed(args.seed, cfg))
    reports = compare_alignment(tcfg)
    rep = reports[tcfg.align_policy]
    out = _out_dir(args.out)
    _write_text(out / "confusion.csv", rep.confusion_csv())
    lines = ["method,align_policy,w,k_corr,k_tot"]
    lines += [f"{tcfg.method},{pol},{r.w:.6f},{r.k_corr},{r.k_tot}" for pol, r in reports.items()]
    _write_text(out / "summary.csv", "\n".join(lines) + "\n")
    print(f"w={rep.w:.6f} k_corr={rep.k_corr} k_tot={rep.k_tot}")
    for pol, r in reports.items():
        if pol != tcfg.align_policy:
            print(f"  (align_policy={pol}: w={r.w:.6f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, "sweep")
    seed = resolve_seed(args.seed, cfg)
    tcfg = trial_config_from(cfg, seed)
    out = _out_dir(args.out)
    grid = cfg.get("grid", "figure")
    if grid == "comparison":
        seeds = cfg.get("seeds", (seed,))
        table = compare_methods(tcfg, COMPARISON_GRIDS, seeds)
        _write_text(out / "comparison.csv", comparison_csv(table))
        for rel, ws in table:
            print(f"{rel} " + " ".join(f"{m}={ws[m]:.6f}" for m in METHODS))
        return EXIT_OK
    if grid == "figure":
        if tcfg.method not in FIGURE_GRIDS:
            raise ConfigError(f"no figure grid for method {tcfg.method}; "
                              f"use grid = custom with param and values")
        name, values = FIGURE_GRIDS[tcfg.method]
    elif grid == "custom":
        if "param" not in cfg or "values" not in cfg:
            raise ConfigError("grid = custom needs param and values")
        name = cfg["param"]
        values = tuple(int(v) if float(v).is_integer() else v for v in cfg["values"])
    else:
        raise ConfigError("grid must be one of figure, comparison, custom")
    if name in tcfg.method_params:
        raise ConfigError(f"{name} is swept; remove it from the config")
    try:
        rows = sweep_parameter(tcfg, name, values)
    except ValueError as exc:
        if isinstance(exc, KlasrError):
            raise
        raise ConfigError(str(exc)) from exc
    _write_text(out / f"sweep_{tcfg.method}_{name}.csv", sweep_csv(rows))
    for value, rep in rows:
        print(f"{name}={value} w={rep.w:.6f}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(args.path)
    try:
        head = path.read_bytes()[:4]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if head == MAGIC:
        d = load_dictionary(path)
        print(f"method: {d.method}")
        print(f"format_version: {d.format_version}")
        print("params: " + " ".join(f"{k}={v}" for k, v in sorted(d.params.items())))
        print("recognition_params: "
              + " ".join(f"{k}={v}" for k, v in sorted(d.recognition_params.items())))
        print(f"entries: {len(d)}")
        for label, feat in d.entries:
            print(f"  {label}\t{_feature_summary(d.method, feat)}")
        return EXIT_OK
    fmt = AUDIO_SUFFIXES.get(path.suffix.lower(), "wav")
    s = load_signal(path, fmt, args.sample_rate if fmt != "wav" else None)
    x = s.samples
    print(f"samples: {len(s)}")
    print(f"sample_rate_hz: {s.sample_rate_hz}")
    print(f"duration_s: {len(s) / s.sample_rate_hz:.4f}")
    print(f"mean: {x.mean():.6g}")
    print(f"rms: {math.sqrt(float(np.mean(x * x))):.6g}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="klasr", description="KL-divergence isolated-word recognition.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="build a KLDB dictionary from a directory of recordings")
    t.add_argument("corpus_dir", help="directory of <label>.wav (or .pcm8/.pcm16) files; "
                                      "manifest.csv with file,label columns overrides labels")
    t.add_argument("--method", choices=METHODS, default="correlation")
    t.add_argument("--order", type=int, help="matrix order (correlation) or AR order")
    t.add_argument("--window", type=int, help="PSD window length, power of two")
    t.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="any other method parameter; repeatable")
    t.add_argument("--sample-rate", type=int, default=8000,
                   help="rate for raw PCM input (default 8000)")
    t.add_argument("--out", required=True, help="dictionary file to write")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("recognize", help="recognize one recording against a dictionary")
    r.add_argument("input_file")
    r.add_argument("--dict", required=True, help="KLDB dictionary")
    r.add_argument("--form", choices=STATISTIC_FORMS, default="full_kl",
                   help="correlation statistic form (default full_kl)")
    r.add_argument("--sample-rate", type=int, default=8000,
                   help="rate for raw PCM input (default 8000)")
    r.set_defaults(func=cmd_recognize)

    for name, func, helptext in (
            ("synth", cmd_synth, "write the synthetic corpus as WAV files plus manifest.csv"),
            ("eval", cmd_eval, "run recognition trials; writes confusion.csv and summary.csv"),
            ("sweep", cmd_sweep, "sweep one parameter (or compare methods); writes CSV")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--config", help=f"key = value file (default: bundled {name}.cfg)")
        c.add_argument("--seed", type=int, help="base seed (default: $KLASR_SEED, then config)")
        c.add_argument("--out", required=True, help="output directory")
        c.set_defaults(func=func)

    i = sub.add_parser("inspect", help="describe a dictionary or a recording")
    i.add_argument("path")
    i.add_argument("--sample-rate", type=int, default=8000,
                   help="rate for raw PCM input (default 8000)")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"klasr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"klasr {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KlasrError, ValueError, OSError) as exc:
        print(f"klasr {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
