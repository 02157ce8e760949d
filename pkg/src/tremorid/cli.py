"""Command-line front end: ``tremorid <subcommand> ...``.

Configuration comes from ``--config FILE`` (or the file named by
``TREMORID_CONFIG``), then individual flags override single fields. Every
command writes the effective configuration next to its main output as
``<output>.config.json``.

Exit status: 0 on success, 1 on pipeline errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TremorError
from .evaluation import (band_energy, evaluate_identification, evaluate_verification,
                         split_by_session, sweep)
from .features import FEATURE_NAMES, feature_matrix, read_feature_csv, write_feature_csv
from .forest import feature_importance, load_model, save_model, train_forest
from .pipeline import (PipelineConfig, dataset_features, load_sessions, pair_recordings, prepare_pair,
                       session_features)
from .signal_io import read_recording, trim_edges, write_recording
from .synth import generate_dataset
from .wflc import filter_signal

CONFIG_ENV = "TREMORID_CONFIG"


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- config


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="JSON config file (default: $%s if set)" % CONFIG_ENV)
    g.add_argument("--trim-ms", type=int)
    g.add_argument("--window-s", type=float)
    g.add_argument("--overlap", type=float)
    g.add_argument("--rate-hz", type=float)
    g.add_argument("--source", choices=("tremor", "residual", "raw"))
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int)
    g.add_argument("--n-trees", type=int)
    g.add_argument("--attr-fraction", type=float)
    g.add_argument("--omega0-init", type=float, help="initial WFLC frequency, rad/sample")


_TOP = {"trim_ms", "window_s", "overlap", "rate_hz", "source", "test_fraction", "seed", "jobs"}
_FOREST = {"n_trees": "n_trees", "attr_fraction": "attr_fraction"}
_WFLC = {"omega0_init": "omega0_init"}


def effective_config(args) -> PipelineConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    top = {k: getattr(args, k) for k in _TOP if getattr(args, k, None) is not None}
    forest = {v: getattr(args, k) for k, v in _FOREST.items() if getattr(args, k, None) is not None}
    wflc = {v: getattr(args, k) for k, v in _WFLC.items() if getattr(args, k, None) is not None}
    if "seed" in top and "rng_seed" not in forest:
        forest["rng_seed"] = top["seed"]
    return cfg.with_overrides(**top, forest=forest, wflc=wflc)


def _echo(cfg: PipelineConfig, output) -> None:
    Path(f"{output}.config.json").write_text(cfg.to_json(), encoding="utf-8")


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _session_inputs(args):
    if args.data:
        return load_sessions(args.data)
    if args.acc and args.gyro:
        return pair_recordings([read_recording(args.acc), read_recording(args.gyro)])
    raise UsageError("give --data DIR or both --acc and --gyro")


def _add_inputs(p):
    p.add_argument("--data", help="directory of recordings (searched recursively)")
    p.add_argument("--acc", help="accelerometer recording")
    p.add_argument("--gyro", help="gyroscope recording")


# --------------------------------------------------------------- commands


def cmd_synth(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profiles, sessions = generate_dataset(
        args.subjects, args.sessions, seed=cfg.seed, duration_s=args.duration,
        rate_hz=cfg.rate_hz, band=tuple(args.band), noise_scale=args.noise_scale,
        frequency_only=args.frequency_only)
    ext = "jsonl" if args.format == "jsonl" else "csv"
    for acc, gyro in sessions:
        d = out / acc.subject_id
        d.mkdir(exist_ok=True)
        stem = f"{acc.subject_id}_{acc.session_date.isoformat()}_{acc.session_id}"
        write_recording(acc, d / f"{stem}_acc.{ext}")
        write_recording(gyro, d / f"{stem}_gyro.{ext}")
    summary = [{"subject": p.subject_id, "dominant_hz": p.dominant_hz,
                "jitter_std_hz": p.jitter_std_hz} for p in profiles]
    _write(out / "profiles.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _echo(cfg, out / "synth")
    print(f"wrote {len(sessions)} sessions for {len(profiles)} subjects to {out}")


def cmd_filter(args, cfg):
    rec = trim_edges(read_recording(args.input), cfg.trim_ms)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for axis in args.axes:
        result = filter_signal(getattr(rec, axis), cfg.wflc)
        _write(out / f"{stem}_{axis}.csv", result.to_csv())
    _echo(cfg, out / f"{stem}_filter")
    print(f"filtered {len(rec)} samples on axes {', '.join(args.axes)} into {out}")


def cmd_extract(args, cfg):
    vectors = dataset_features(_session_inputs(args), cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(args.out, vectors)
    _echo(cfg, args.out)
    print(f"wrote {len(vectors)} feature vectors to {args.out}")


def _split(vectors, cfg, use_all):
    if use_all:
        return vectors, vectors
    return split_by_session(vectors, cfg.test_fraction, allow_empty_test=True)


def cmd_train(args, cfg):
    vectors = read_feature_csv(args.features)
    train, _ = _split(vectors, cfg, args.all)
    model = train_forest(feature_matrix(train), [v.subject_id for v in train], cfg.forest,
                         FEATURE_NAMES, jobs=cfg.jobs)
    Path(args.model).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.model)
    _echo(cfg, args.model)
    print(f"trained {cfg.forest.n_trees} trees on {len(train)} windows "
          f"({len(model.label_set)} subjects) -> {args.model}")


def cmd_evaluate(args, cfg):
    vectors = read_feature_csv(args.features)
    _, test = _split(vectors, cfg, args.all)
    if not test:
        raise UsageError("no test windows: set --test-fraction > 0 or pass --all")
    report = evaluate_identification(load_model(args.model), test, cfg.report_echo())
    _write(args.report, report.to_json())
    if args.csv:
        _write(args.csv, report.to_csv())
    _echo(cfg, args.report)
    print(f"accuracy {report.accuracy:.4f}  FMR {report.false_match_rate:.4f}  "
          f"FNMR {report.false_non_match_rate:.4f}  (n={report.n_test})")


def _recording_votes(model, args, cfg):
    acc, gyro = read_recording(args.acc), read_recording(args.gyro)
    vectors = session_features(acc, gyro, cfg)
    votes = model.votes(feature_matrix(vectors)).sum(axis=0)
    label = model.label_set[int(np.argmax(votes))]
    return label, dict(zip(model.label_set, votes.tolist())), len(vectors)


def cmd_identify(args, cfg):
    model = load_model(args.model)
    label, votes, n = _recording_votes(model, args, cfg)
    result = {"predicted": label, "votes": votes, "n_windows": n}
    print(f"predicted subject: {label}")
    for lab, v in sorted(votes.items(), key=lambda kv: (-kv[1], model.label_set.index(kv[0]))):
        print(f"  {lab}: {v}")
    if args.out:
        _write(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
        _echo(cfg, args.out)


def cmd_verify(args, cfg):
    model = load_model(args.model)
    if args.claim is not None:
        if not (args.acc and args.gyro):
            raise UsageError("--claim needs --acc and --gyro")
        label, votes, n = _recording_votes(model, args, cfg)
        accepted = label == args.claim
        result = {"claim": args.claim, "predicted": label, "accepted": accepted, "votes": votes}
        print(("ACCEPT" if accepted else "REJECT") + f" claim {args.claim} (predicted {label})")
    elif args.features:
        vectors = read_feature_csv(args.features)
        _, test = _split(vectors, cfg, args.all)
        rep = evaluate_verification(model, test, seed=cfg.seed)
        result = rep.to_dict()
        print(f"verification accuracy {rep.accuracy:.4f} over {rep.n_claims} claims")
    else:
        raise UsageError("give --features, or --acc/--gyro with --claim")
    if args.out:
        _write(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
        _echo(cfg, args.out)


def cmd_sweep(args, cfg):
    table = sweep(args.parameter, args.values, load_sessions(args.data), cfg, repeats=args.repeats)
    _write(args.out, table.to_csv())
    _echo(cfg, args.out)
    for value, mean, _ in table.rows:
        print(f"{args.parameter}={value}: mean accuracy {mean:.4f}")


def cmd_rank(args, cfg):
    ranking = feature_importance(load_model(args.model))
    top = ranking[: args.top] if args.top else ranking
    lines = ["rank,feature,split_count"] + [f"{i},{n},{c}" for i, (n, c) in enumerate(top, 1)]
    if args.out:
        _write(args.out, "\n".join(lines) + "\n")
        _echo(cfg, args.out)
    for line in lines[1:]:
        print(line)


def _parse_band(text: str):
    try:
        lo, hi = (float(x) for x in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LO-HI, got {text!r}") from None
    return lo, hi


def cmd_band_energy(args, cfg):
    traces = []
    rate = None
    for acc, gyro in load_sessions(args.data):
        for rec in prepare_pair(acc, gyro, cfg):
            if args.sensor != "both" and rec.sensor != args.sensor:
                continue
            skip = int(round(args.skip_s * rec.sample_rate_hz))
            rate = rec.sample_rate_hz
            traces.extend(getattr(rec, a)[skip:] for a in "xyz")
    if not traces:
        raise UsageError("no recordings matched")
    fractions = band_energy(traces, rate, args.bands)
    result = {f"{lo:g}-{hi:g}": frac for (lo, hi), frac in zip(args.bands, fractions)}
    if args.out:
        _write(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
        _echo(cfg, args.out)
    for band, frac in result.items():
        print(f"{band} Hz: {frac:.3f}")


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tremorid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic subjects and sessions")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--sessions", type=int, default=4)
    p.add_argument("--duration", type=float, default=60.0, help="seconds per session")
    p.add_argument("--band", type=float, nargs=2, default=(4.0, 12.0), metavar=("LO", "HI"))
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--frequency-only", action="store_true",
                   help="subjects differ only in tremor frequencies")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("filter", help="run the WFLC over one recording and dump its traces")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--axes", nargs="+", choices=("x", "y", "z"), default=["x", "y", "z"])
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("extract", help="recordings -> feature CSV")
    _add_inputs(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="feature CSV -> model file")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--all", action="store_true", help="train on every window (no split)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="identification metrics on the held-out sessions")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--csv", help="also write per-class rates as CSV")
    p.add_argument("--all", action="store_true", help="evaluate every window")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("identify", help="predict who produced a recording pair")
    p.add_argument("--model", required=True)
    p.add_argument("--acc", required=True)
    p.add_argument("--gyro", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("verify", help="verification accuracy, or accept/reject one claim")
    p.add_argument("--model", required=True)
    p.add_argument("--features")
    p.add_argument("--all", action="store_true")
    p.add_argument("--acc")
    p.add_argument("--gyro")
    p.add_argument("--claim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="accuracy as a function of one parameter")
    p.add_argument("--data", required=True)
    p.add_argument("--parameter", required=True, choices=("window_s", "n_trees", "overlap"))
    p.add_argument("--values", required=True, type=float, nargs="+")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rank-features", help="features ranked by split count")
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("band-energy", help="tremor energy share per frequency band")
    p.add_argument("--data", required=True)
    p.add_argument("--bands", type=_parse_band, nargs="+",
                   default=[(4.0, 7.0), (7.0, 10.0), (6.0, 10.0)])
    p.add_argument("--sensor", choices=("both", "accelerometer", "gyroscope"), default="both")
    p.add_argument("--skip-s", type=float, default=0.0,
                   help="seconds of filter start-up to drop from each trace")
    p.add_argument("--out")
    p.set_defaults(func=cmd_band_energy)

    for action in sub.choices.values():
        _common(action)
    return parser


def _origin(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        parts = Path(frame.filename).parts
        if "tremorid" in parts:
            return "tremorid." + Path(frame.filename).stem
    return "tremorid"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
    except (ValueError, TypeError, OSError) as exc:
        parser.error(f"bad configuration: {exc}")
    try:
        args.func(args, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (TremorError, ValueError, OSError) as exc:
        print(f"{_origin(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
