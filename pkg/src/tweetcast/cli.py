"""Command-line driver.

Subcommands mirror the pipeline stages (``ingest``, ``features``,
``cluster``, ``train``, ``evaluate``, ``report``), plus ``run`` for the
whole chain and ``synth`` to generate the bundled-style demo corpus.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import ConfigError, exit_code_for
from .pipeline import (
    EvalReport,
    build_feature_store,
    emit_reports,
    load_or_build_features,
    run_pipeline,
    stage_cluster,
    stage_evaluate,
    stage_ingest,
    stage_train,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (key-value text with [sections])")
    parser.add_argument("--tweets", help="tweet corpus path")
    parser.add_argument("--prices", help="daily price series path")
    parser.add_argument("--task", choices=("regression", "classification", "cluster"))
    parser.add_argument("--model", help="model name or 'all'")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="ingest shard workers")
    parser.add_argument("--seed", type=int, help="master seed")


def _build_config(args) -> PipelineConfig:
    overrides = {
        "tweets_path": args.tweets,
        "prices_path": args.prices,
        "task": args.task,
        "model": args.model,
        "out_dir": args.out,
        "workers": args.workers,
        "seed": args.seed,
    }
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetcast",
        description="Tweet-corpus mining and next-day price prediction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("ingest", "validate the corpus and price series, write stats"),
        ("features", "build the day-level feature store"),
        ("cluster", "user-level clustering analyses"),
        ("train", "grid-search and fit the selected models"),
        ("evaluate", "score persisted models on the test split"),
        ("report", "re-emit report files from report.json"),
        ("run", "full pipeline: features, train, evaluate, report"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name in ("run", "features"):
            p.add_argument("--rebuild", action="store_true", help="ignore a cached feature store")
        if name in ("run", "report"):
            p.add_argument("--render", action="store_true", help="also render SVG figures")

    p = sub.add_parser("synth", help="generate a synthetic demo corpus + prices")
    p.add_argument("--tweets", required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--n-tweets", type=int, default=10000)
    p.add_argument("--n-days", type=int, default=500)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--bulk", action="store_true", help="fast plain corpus (throughput runs)")
    return parser


def _cmd_synth(args) -> None:
    from . import synth

    if args.bulk:
        meta = synth.generate_bulk_corpus(args.tweets, args.prices, args.n_tweets, args.seed)
    else:
        spec = synth.CorpusSpec(n_tweets=args.n_tweets, n_days=args.n_days, seed=args.seed)
        meta = synth.generate_corpus(args.tweets, args.prices, spec)
    print(json.dumps(meta, sort_keys=True))


def _cmd_report(args, cfg: PipelineConfig) -> None:
    report_path = Path(cfg.out_dir) / "report.json"
    if not report_path.exists():
        raise ConfigError(f"no report.json under {cfg.out_dir}; run evaluate first")
    report = EvalReport.from_json(report_path.read_text())
    written = emit_reports(report, cfg.out_dir, render=getattr(args, "render", False))
    for path in written:
        print(path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            _cmd_synth(args)
            return 0
        cfg = _build_config(args)
        if args.command == "ingest":
            cfg.validate()
            payload = stage_ingest(cfg)
            print(json.dumps(payload["corpus"], sort_keys=True))
        elif args.command == "features":
            cfg.validate()
            if getattr(args, "rebuild", False):
                build_feature_store(cfg)
            else:
                load_or_build_features(cfg)
            print(f"feature store ready under {cfg.out_dir}")
        elif args.command == "cluster":
            cfg.validate()
            summary = stage_cluster(cfg)
            print(json.dumps(summary["kmeans"], sort_keys=True))
        elif args.command == "train":
            cfg.validate()
            rows, _ = load_or_build_features(cfg)
            info = stage_train(cfg, rows)
            print(json.dumps(info["best_params"], sort_keys=True))
        elif args.command == "evaluate":
            cfg.validate()
            rows, _ = load_or_build_features(cfg)
            report = stage_evaluate(cfg, rows)
            emit_reports(report, cfg.out_dir)
            print(f"report written under {cfg.out_dir}")
        elif args.command == "report":
            _cmd_report(args, cfg)
        elif args.command == "run":
            result = run_pipeline(
                cfg, rebuild=getattr(args, "rebuild", False), render=getattr(args, "render", False)
            )
            if isinstance(result, EvalReport):
                print((Path(cfg.out_dir) / "report.txt").read_text())
            else:
                print(json.dumps(result["kmeans"], sort_keys=True))
        return 0
    except BrokenPipeError:
        return 0
    except Exception as exc:  # noqa: BLE001 - single translation point to exit codes
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        if code == 1:
            raise
        return code


if __name__ == "__main__":
    sys.exit(main())
