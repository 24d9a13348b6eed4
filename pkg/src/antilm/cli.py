"""Command line entry point.

    decode run --config experiment.json
    decode sweep --config experiment.json [--grid -0.1 0.1 0.3 0.5 0.8 1.0]
    decode compare a.json b.json [--threshold 5.0] [--a-objective ... --a-mode ...]
    decode train-toy --corpus sentences.txt --order 2 --k 1.0 --out model.json

Exit codes: 0 success, 1 configuration error, 2 transport error budget
exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError, DecodeEngineError, TransportError
from .lm import train_ngram
from .runner import ExperimentConfig, compare_failures, run_experiment, sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRANSPORT = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decode", description="Contrastive decoding engine and MT evaluation harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the experiment JSON config")

    p_sweep = sub.add_parser("sweep", help="run a penalty-weight sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument(
        "--grid", type=float, nargs="+", default=None,
        help="weights to sweep (default: -0.1 0.1 0.3 0.5 0.8 1.0)",
    )

    p_cmp = sub.add_parser("compare", help="better/equal/worse comparison of two reports")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.add_argument("--threshold", type=float, default=5.0)
    p_cmp.add_argument("--a-objective", default=None)
    p_cmp.add_argument("--a-mode", default=None)
    p_cmp.add_argument("--b-objective", default=None)
    p_cmp.add_argument("--b-mode", default=None)

    p_toy = sub.add_parser("train-toy", help="train and serialize a toy n-gram LM")
    p_toy.add_argument("--corpus", required=True, help="text file, one sentence per line")
    p_toy.add_argument("--order", type=int, required=True)
    p_toy.add_argument("--k", type=float, required=True)
    p_toy.add_argument("--out", required=True)
    p_toy.add_argument(
        "--no-unk", action="store_true",
        help="omit the unknown token from the vocabulary (prompts must then be fully in-vocabulary)",
    )
    return parser


def _key(objective: str | None, mode: str | None) -> tuple[str, str] | None:
    if objective is None and mode is None:
        return None
    if objective is None or mode is None:
        raise ConfigurationError("give both --{a,b}-objective and --{a,b}-mode, or neither")
    return (objective, mode)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_json_file(args.config)
    report = run_experiment(cfg)
    errors = sum(cell["errors"] for per_obj in report.aggregates.values() for cell in per_obj.values())
    for mode, per_obj in report.aggregates.items():
        for name, cell in per_obj.items():
            print(
                f"{mode}\t{name}\tBLEU={cell['bleu']:.4f}\tREG={cell['reg']:.2f}\t"
                f"MER={cell['mer']:.2f}\tfailures={cell['failures']}"
            )
    if cfg.output:
        print(f"report written to {cfg.output}", file=sys.stderr)
    budget = cfg.transport_error_budget
    if budget is not None and errors > budget:
        print(f"transport errors ({errors}) exceeded budget ({budget})", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_json_file(args.config)
    rows = sweep(cfg, grid=args.grid)
    for row in rows:
        bleus = "\t".join(f"{mode}={v:.4f}" for mode, v in sorted(row["bleu"].items()))
        print(f"weight={row['weight']:g}\t{row['objective']}\t{bleus}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    def load(path: str) -> dict:
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read report {path}: {exc}") from exc

    result = compare_failures(
        load(args.report_a),
        load(args.report_b),
        threshold_bleu=args.threshold,
        a_key=_key(args.a_objective, args.a_mode),
        b_key=_key(args.b_objective, args.b_mode),
    )
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_train_toy(args: argparse.Namespace) -> int:
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise ConfigurationError(f"corpus file not found: {corpus_path}")
    lines = [ln for ln in corpus_path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    model = train_ngram(lines, order=args.order, k=args.k, include_unk=not args.no_unk)
    model.save(args.out)
    print(
        f"trained order-{model.order} model (k={model.k:g}, |V|={model.vocab_size}, "
        f"{len(model.counts)} contexts) -> {args.out}"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "compare": _cmd_compare,
        "train-toy": _cmd_train_toy,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except DecodeEngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
