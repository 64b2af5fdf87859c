"""Synthesize EEG, run the ERD detectors and benchmark them.

Exit codes: 0 success, 1 bad input or configuration, 2 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .compare import run_bench, run_comparison
from .config import AnalysisConfig, load_config
from .errors import ConfigError, ErdbenchError, InvariantError
from .io import (
    ReportFormat,
    emit_report,
    load_recording,
    save_recording,
    segment_trials,
    sidecar_path,
    write_ground_truth,
)
from .synth import generate

log = logging.getLogger("erdbench")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erdbench", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default",
                        help="YAML config file, or 'default' (default: %(default)s)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic recording")
    s.add_argument("--out", required=True, type=Path,
                   help="recording path (.csv or .jsonl); truth goes to <stem>.truth.json")

    for name, helptext in (("analyze-standard", "band-power ERD only"),
                           ("analyze-novel", "streaming energy-ratio ERD only"),
                           ("compare", "both methods on the same trials")):
        a = sub.add_parser(name, parents=[common], help=helptext)
        a.add_argument("--in", dest="inp", required=True, type=Path)
        a.add_argument("--out", required=True, type=Path,
                       help="JSON file, or a directory of CSV tables with --format csv")
        a.add_argument("--format", choices=[f.value for f in ReportFormat], default="json")

    b = sub.add_parser("bench", parents=[common], help="stage timings and operation counts")
    b.add_argument("--in", dest="inp", required=True, type=Path)
    b.add_argument("--out", required=True, type=Path)

    v = sub.add_parser("validate", parents=[common],
                       help="check a config and recording without analysing")
    v.add_argument("--in", dest="inp", required=True, type=Path)
    return p


def _config(args) -> AnalysisConfig:
    cfg = load_config(args.config)
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def _trials(args, cfg):
    rec = load_recording(args.inp)
    return segment_trials(rec, cfg.timing)


def _synth(args, cfg):
    rec, trials, truth = generate(cfg.synth_spec())
    save_recording(rec, args.out)
    side = sidecar_path(args.out)
    write_ground_truth(truth, trials, side)
    log.info("wrote %s (%d trials, %d samples) and %s", args.out, len(trials),
             rec.n_samples, side)


_METHODS = {"analyze-standard": ("standard",), "analyze-novel": ("novel",),
            "compare": ("standard", "novel")}


def _analyze(args, cfg):
    trials = _trials(args, cfg)
    report = run_comparison(trials, cfg, methods=_METHODS[args.command])
    emit_report(report, args.out, args.format)
    log.info("%d trials (%d standard, %d novel) -> %s", report.n_trials, report.n_standard,
             report.n_novel, args.out)


def _bench(args, cfg):
    result = run_bench(_trials(args, cfg), cfg)
    args.out.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    log.info("standard latency %.1f ms, novel latency %.1f ms",
             result.standard.latency_ms, result.novel.latency_ms)


def _validate(args, cfg):
    trials = _trials(args, cfg)
    rec = trials.recording
    missing = sorted({lbl for p in cfg.pairs for lbl in (p.positive, p.negative)}
                     .union(cfg.standard.channels) - set(rec.labels))
    if missing:
        raise ConfigError(f"recording lacks channels {missing}", field="montage")
    print(f"ok: {rec.n_channels} channels, {rec.n_samples} samples at "
          f"{rec.sample_rate_hz:g} Hz, {len(trials)} trials "
          f"({len(trials.valid_trials)} valid)")


_HANDLERS = {"synth": _synth, "analyze-standard": _analyze, "analyze-novel": _analyze,
             "compare": _analyze, "bench": _bench, "validate": _validate}


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        _HANDLERS[args.command](args, cfg)
    except (InvariantError, AssertionError) as exc:
        print(f"erdbench: internal error: {exc}", file=sys.stderr)
        return 2
    except ErdbenchError as exc:
        print(f"erdbench: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"erdbench: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
