"""Command line entry point: ``tsms run | explain | bench``.

Exit codes: 0 success, 1 some datasets failed (logged), 2 invalid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, TSMSError
from .harness import (
    VARIANT_METHODS,
    RunConfig,
    load_dataset_csv,
    prepare_dataset,
    run_experiment,
    run_variant,
)
from .report import emit_explanation_report

log = logging.getLogger("tsms")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if getattr(args, "output_dir", None):
        config.output_dir = args.output_dir
    return config


def cmd_run(args) -> int:
    config = _load_config(args)
    report = run_experiment(config)
    report_path, runtime_path = report.write(config.output_dir)
    print(f"{'method':<12} {'avg rank':>8} {'wins':>5} {'losses':>6}")
    for m in report.methods:
        w, l = report.wins_losses.get(m, (0, 0))
        print(f"{m:<12} {report.avg_ranks.get(m, float('nan')):>8.3f} {w:>5d} {l:>6d}")
    print(f"report: {report_path}")
    print(f"runtime: {runtime_path}")
    if report.failures:
        for name, why in report.failures.items():
            print(f"failed: {name}: {why}", file=sys.stderr)
        return 1
    return 0


def cmd_explain(args) -> int:
    config = _load_config(args)
    if args.variant not in VARIANT_METHODS:
        raise ConfigError(f"unknown variant {args.variant!r}")
    raw = load_dataset_csv(args.dataset, config.seed)
    prep = prepare_dataset(Path(args.dataset).name, raw, config)
    run, _ = run_variant(prep, args.variant, config, explain=True)
    out = Path(args.out) if args.out else Path(config.output_dir) / f"{Path(args.dataset).stem}.explain.jsonl"
    emit_explanation_report(
        run.records,
        run.initial_rocs,
        out,
        L=config.L,
        fallback=prep.fallback,
        variant=args.variant,
        models=[{"model_id": m.model_id, "name": m.name} for m in prep.pool],
    )
    print(f"explanation report: {out}")
    return 0


def cmd_bench(args) -> int:
    config = _load_config(args)
    report = run_experiment(config)
    summary = report.runtime_summary()
    print(f"{'method':<12} {'runtime [s]':>20}")
    for m in report.methods:
        s = summary[m]
        print(f"{m:<12} {s['mean']:>10.3f} ± {s['std']:.3f}")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.json").write_text(json.dumps({"summary": summary, "per_dataset": report.runtime}, indent=2) + "\n")
    return 1 if report.failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsms", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explain", help="emit an explanation report for one dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", default="adaptive", choices=sorted(VARIANT_METHODS))
    p.add_argument("--out")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("bench", help="runtime comparison of the selection variants")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except TSMSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
