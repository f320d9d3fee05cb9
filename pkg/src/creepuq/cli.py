"""Command-line entry point: ``creepuq {bench,al,synth,plot}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .active import STRATEGIES, ActiveLearningTrace
from .data import DataError
from .experiment import ConfigError, ExperimentConfig, run_al, run_benchmark, write_synthetic
from .plots import emit_plots

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger("creepuq")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="creepuq", description="Creep-life prediction with uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("bench", "cross-validated benchmark of the configured models"),
                            ("al", "active-learning replicates and learning curves"),
                            ("synth", "write a synthetic creep dataset as CSV"),
                            ("plot", "re-render figures from saved reports and traces")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="experiment config (JSON)")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--models", help="comma-separated subset of models")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(args, required: bool) -> ExperimentConfig:
    if args.config is None:
        if required:
            raise ConfigError(f"{args.command} needs --config")
        config = ExperimentConfig.from_dict({})
    else:
        config = ExperimentConfig.load(args.config)
    models = [m.strip() for m in args.models.split(",") if m.strip()] if args.models else None
    return config.with_overrides(seed=args.seed, models=models,
                                 output_dir=str(args.out) if args.out else None)


def _trace_from_file(path: Path) -> ActiveLearningTrace:
    stem = path.stem[len("trace_"):]
    head, seed = stem.rsplit("_", 1)
    for strategy in STRATEGIES:
        if head.endswith("_" + strategy):
            model = head[: -len(strategy) - 1]
            return ActiveLearningTrace.from_csv(path.read_text(encoding="utf-8"), strategy, model, int(seed))
    raise ValueError(f"cannot parse trace file name {path.name}")


def _cmd_bench(config: ExperimentConfig) -> int:
    out = Path(config.data["output_dir"])
    result = run_benchmark(config, out)
    reports = [json.loads((out / f"report_{m}.json").read_text(encoding="utf-8")) for m in result.reports]
    emit_plots([r for r in reports if r["folds"]], [], out)
    print((out / "table.md").read_text(encoding="utf-8"), end="")
    for err in result.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_RUNTIME if result.errors else EXIT_OK


def _cmd_al(config: ExperimentConfig) -> int:
    out = Path(config.data["output_dir"])
    traces, errors = run_al(config, out)
    if traces:
        emit_plots([], traces, out)
    for t in traces:
        print(f"{t.model} {t.strategy} seed={t.seed} final_r2={t.records[-1].r2:.4f} labels={t.records[-1].n_labeled}")
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_RUNTIME if errors else EXIT_OK


def _cmd_synth(config: ExperimentConfig, seed: int | None) -> int:
    if seed is not None:
        data = dict(config.data)
        data["dataset"] = {**data["dataset"], "seed": seed}
        config = ExperimentConfig.from_dict(data)
    print(write_synthetic(config, config.data["output_dir"]))
    return EXIT_OK


def _cmd_plot(out: Path) -> int:
    reports = [json.loads(p.read_text(encoding="utf-8")) for p in sorted(out.glob("report_*.json"))]
    traces = [_trace_from_file(p) for p in sorted(out.glob("trace_*.csv"))]
    for path in emit_plots([r for r in reports if r["folds"]], traces, out):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args, required=args.command in ("bench", "al"))
        if args.command == "plot":
            return _cmd_plot(Path(config.data["output_dir"]))
        if args.command == "synth":
            return _cmd_synth(config, args.seed)
        return _cmd_bench(config) if args.command == "bench" else _cmd_al(config)
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
