"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 invalid config or input, 2 missing upstream
artifact, 3 any other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .cohort import CohortError
from .pipeline import ConfigError, MissingArtifactError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_MISSING_ARTIFACT = 2
EXIT_RUNTIME = 3

log = logging.getLogger("seroprompt")

STAGE_HELP = {
    "generate": "synthesize (or ingest) the cohort",
    "preprocess": "drop high-missing features, split by patient, fit imputation",
    "select": "rank features by boosted-tree importance and take the top-k union",
    "train-baselines": "fit AdaBoost, gradient boosting, random forest and k-NN on both targets",
    "train-seq": "bin, tokenize and train the sequence model",
    "evaluate": "score every arm on the test split",
    "report": "write metric tables and the ablation summary",
    "run-all": "run every stage in order",
    "missing-experiment": "compare accuracy loss at low vs high missingness",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML pipeline config")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", type=Path, default=None, help="output root (default: config output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="seroprompt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in STAGE_HELP.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    serve = sub.add_parser("serve", parents=[common], help="serve predictions over HTTP")
    serve.add_argument("--model", default="seqmodel", help="seqmodel or a baseline kind (gbdt, adaboost, random_forest, knn)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _run(args: argparse.Namespace) -> int:
    config = pipeline.load_config(args.config, output_dir=None if args.out is None else str(args.out), seed=args.seed)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(config.run_dir, model=args.model)
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return EXIT_OK
    if args.command == "run-all":
        run_dir = pipeline.run_all(config)
    elif args.command == "missing-experiment":
        run_dir = pipeline.missing_experiment(config)
    else:
        run_dir = pipeline.STAGES[args.command](config)
    print(run_dir)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except (ConfigError, CohortError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
