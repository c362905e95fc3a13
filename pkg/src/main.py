# src/main.py
"""
groupfs command line.

    python src/main.py generate --n 1000 --d 20 --rho 0.95 --noise 0.05 --out runs/data
    python src/main.py choose-c --data runs/data/X.csv --c-max 8
    python src/main.py train --data runs/data/X.csv -C 12 --lambda2 6.2
    python src/main.py select --checkpoint runs/train-seed-0 --min-features 10
    python src/main.py eval --data runs/data/X.csv --selection runs/train-seed-0/selection.json

Exit codes: 0 ok, 1 domain failure, 2 usage error.
"""

from __future__ import annotations
import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional, Union

from pydantic import ValidationError

ROOT = Path(__file__).parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from app.log_manager import configure_logging
from config import settings
from core.errors import BudgetWarning, ConstantFeatureWarning, GroupFSError
from services.command_manager import COMMANDS

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _groups_arg(text: str) -> Union[int, str]:
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")


def _lambda2_arg(text: str) -> Union[float, str]:
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")


# ------------------------------------------------------------------
#   Parser
# ------------------------------------------------------------------

def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with RunConfig overrides")
    p.add_argument("--preset", help="named preset from presets.json")
    p.add_argument("--out", dest="out_dir", help=f"output directory (default ${settings.OUTPUT_ROOT_ENV} or ./runs)")
    p.add_argument("--seed", type=int)
    p.add_argument("--log-level", dest="log_level", help=f"DEBUG, INFO, ... (default ${settings.LOG_LEVEL_ENV} or INFO)")
    return p


def _data_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--data", dest="data_path", help="CSV file; two-moons is generated when omitted")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--n", dest="n_samples", type=int, help="two-moons samples")
    p.add_argument("--d", dest="n_features", type=int, help="two-moons features")
    p.add_argument("--rho", type=float)
    p.add_argument("--noise", dest="moons_noise", type=float, help="two-moons noise std")
    return p


def _model_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("-C", "--C", dest="C", type=_groups_arg, help="number of groups or 'auto'")
    p.add_argument("--c-max", dest="c_max", type=int)
    p.add_argument("--p-main", dest="p_main", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--K", dest="K", type=int)
    p.add_argument("--t", dest="t", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=_lambda2_arg, help="sparsity weight or 'auto'")
    p.add_argument("--lambda2-sweep", dest="lambda2_sweep", help="lo:hi:steps")
    p.add_argument("--beta", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--start-t", dest="start_t", type=float)
    p.add_argument("--min-t", dest="min_t", type=float)
    p.add_argument("--sweep-seeds", dest="sweep_seeds", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--log-every", dest="log_every", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME,
                                     description="Unsupervised group feature selection")
    sub = parser.add_subparsers(dest="command", required=True)
    common, data, model = _common_parent(), _data_parent(), _model_parent()

    sub.add_parser("generate", parents=[common, data], help="write a two-moons dataset")

    p = sub.add_parser("choose-c", parents=[common, data], help="group-count heuristic")
    p.add_argument("--c-max", dest="c_max", type=int)

    sub.add_parser("train", parents=[common, data, model], help="train one model or a lambda2 sweep")
    sub.add_parser("sweep", parents=[common, data, model], help="lambda2 sweep over a worker pool")

    p = sub.add_parser("select", parents=[common, data], help="rank groups and apply a budget")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json or its run directory")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--groups", type=int, help="take the first k groups")
    budget.add_argument("--min-features", dest="min_features", type=int)
    p.add_argument("--max-features", dest="max_features", type=int,
                   help="cap; with --accuracy-guided it limits the search")
    p.add_argument("--accuracy-guided", dest="accuracy_guided", action="store_true",
                   help="stop at the first local maximum of k-means accuracy (needs labels)")
    p.add_argument("--k", type=int, help="clusters for accuracy-guided selection")

    p = sub.add_parser("eval", parents=[common, data], help="metrics for a selection")
    p.add_argument("--selection", help="selection.json; all features when omitted")
    p.add_argument("--k", type=int, help="k-means clusters (default: number of classes)")
    p.add_argument("--seeds", type=int, default=len(settings.EVAL_SEEDS), help="k-means seeds 0..n-1")

    p = sub.add_parser("gradcheck", help="finite-difference check of the gradients")
    p.add_argument("--n", type=int, default=settings.GRADCHECK_SAMPLES)
    p.add_argument("--d", type=int, default=settings.GRADCHECK_FEATURES)
    p.add_argument("--groups", type=int, default=settings.GRADCHECK_GROUPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--beta", type=float)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=settings.GRADCHECK_TOLERANCE)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--log-level", dest="log_level")

    p = sub.add_parser("ls-baseline", parents=[common, data], help="Laplacian Score feature ranking")
    p.add_argument("--n-select", dest="n_select", type=int, required=True)
    p.add_argument("--K", dest="K", type=int)

    return parser


def _check_budget_flags(parser: argparse.ArgumentParser, args: argparse.Namespace):
    """--max-features only combines with another budget as the accuracy-guided cap."""
    if args.command != "select" or args.accuracy_guided or args.max_features is None:
        return
    for flag, value in (("--groups", args.groups), ("--min-features", args.min_features)):
        if value is not None:
            parser.error(f"argument --max-features: not allowed with argument {flag}")


# ------------------------------------------------------------------
#   Entry point
# ------------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_budget_flags(parser, args)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        configure_logging(args.log_level)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"{settings.APP_NAME}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    # already logged where they are raised
    warnings.simplefilter("ignore", BudgetWarning)
    warnings.simplefilter("ignore", ConstantFeatureWarning)

    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        logger.error("invalid configuration:\n%s", exc)
        return EXIT_USAGE
    except GroupFSError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
