"""Command-line experiment harness.

Subcommands: ``synth`` (generate ground truth and optional observations),
``complete`` (run the Bayesian completion on an observation file),
``sweep`` (sampling-ratio study), ``rank-study`` (component-budget study),
``compare`` (completion vs. the slice baseline on identical samples).

Exit codes: 0 success, 1 solver failure, 2 usage or I/O error.  All
randomness flows from ``--seed`` through the documented sub-streams, so
identical flags reproduce output files byte-for-byte (wall-time fields in
reports are the one exception).
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import seeding
from .bayescp import HyperParams, SolverConfig
from .core import relative_error
from .errors import (OperatorError, SolverError, TnsBoundsError, TnsDataError,
                     TnsFormatError)
from .experiments import (COMPARE_COLUMNS, RANK_STUDY_COLUMNS, SWEEP_COLUMNS,
                          complete_experiment, default_ratio_grid, run_compare,
                          run_rank_study, run_sweep)
from .synth import (NoiseSpec, WaferParams, add_gaussian_noise, observe,
                    random_cp_tensor, sample_mask, wafer_pattern)
from .tnsio import load_tns, write_tns
from .vp import LassoConfig


def _dims(text):
    try:
        dims = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad extent list {text!r}") from None
    if not dims or any(n < 1 for n in dims):
        raise argparse.ArgumentTypeError(f"extents must be positive, got {text!r}")
    return dims


def _float_list(text):
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _int_list(text):
    try:
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])


def _solver_flags(p):
    p.add_argument("--max-rank", type=int, default=15)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--prune-threshold", type=float, default=1e-2)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--init", choices=("random", "spectral"), default="spectral")
    p.add_argument("--a0", type=float, default=1e-6)
    p.add_argument("--b0", type=float, default=1e-6)
    p.add_argument("--c0", type=float, default=1e-6)
    p.add_argument("--d0", type=float, default=1e-6)


def _hyper(args, max_rank=None):
    return HyperParams(max_rank=max_rank if max_rank is not None else args.max_rank,
                       a0=args.a0, b0=args.b0, c0=args.c0, d0=args.d0)


def _solver_cfg(args, seed=None):
    return SolverConfig(
        max_iters=args.max_iters, tol=args.tol,
        prune_enabled=not args.no_prune, prune_threshold=args.prune_threshold,
        seed=args.seed if seed is None else seed, init_mode=args.init)


def cmd_synth(args):
    if (args.rank is None) == (not args.wafer):
        raise UsageError("pick exactly one of --rank and --wafer")
    if args.wafer:
        truth = wafer_pattern(args.dims, WaferParams(), args.seed)
        kind = "wafer"
    else:
        _, truth = random_cp_tensor(args.dims, args.rank, args.seed)
        kind = "cp"
    streams = {"factors": [args.seed, seeding.FACTOR_STREAM],
               "wafer": [args.seed, seeding.WAFER_STREAM]}
    written = truth
    if args.snr_db is not None:
        written = add_gaussian_noise(truth, NoiseSpec(snr_db=args.snr_db), args.seed)
        streams["noise"] = [args.seed, seeding.NOISE_STREAM]
    write_tns(args.out, written)
    obs_path = None
    if args.ratio is not None:
        if not args.obs_out:
            raise UsageError("--ratio needs --obs-out to know where to write")
        mask = sample_mask(args.dims, args.ratio, args.seed)
        write_tns(args.obs_out, observe(written, mask))
        streams["mask"] = [args.seed, seeding.MASK_STREAM]
        obs_path = args.obs_out
    manifest = {
        "command": "synth", "kind": kind, "dims": list(args.dims),
        "rank": args.rank, "snr_db": args.snr_db, "ratio": args.ratio,
        "seed": args.seed, "streams": streams,
        "outputs": {"tensor": args.out, "observations": obs_path},
    }
    print(json.dumps(manifest, sort_keys=True))
    return 0


def cmd_complete(args):
    obs = load_tns(args.obs)
    truth = load_tns(args.truth, as_dense=True) if args.truth else None
    result, report = complete_experiment(
        obs, _hyper(args), _solver_cfg(args), truth=truth, seed=args.seed)
    if args.out:
        write_tns(args.out, result.prediction)
    payload = report.to_dict()
    payload["converged"] = result.converged
    payload["final_elbo"] = result.final_elbo
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.report:
        with open(args.report, "w", encoding="ascii") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_sweep(args):
    truth = load_tns(args.truth, as_dense=True)
    ratios = args.ratios if args.ratios else default_ratio_grid()
    rows = run_sweep(truth, _hyper(args), _solver_cfg(args), args.seed,
                     ratios=ratios, reps=args.reps, snr_db=args.snr_db)
    _write_csv(args.out, SWEEP_COLUMNS, rows)
    return 0


def cmd_rank_study(args):
    truth = load_tns(args.truth, as_dense=True)
    rows = run_rank_study(
        truth, _solver_cfg(args), args.seed, ratio=args.ratio,
        max_ranks=args.max_ranks, snr_db=args.snr_db,
        hyper_factory=lambda mr: _hyper(args, max_rank=mr))
    _write_csv(args.out, RANK_STUDY_COLUMNS, rows)
    return 0


def cmd_compare(args):
    truth = load_tns(args.truth, as_dense=True)
    lasso = LassoConfig(lam=args.lam, max_iters=args.vp_max_iters, seed=args.seed)
    rows = run_compare(truth, _hyper(args), _solver_cfg(args), lasso,
                       args.seed, args.ratio, snr_db=args.snr_db)
    _write_csv(args.out, COMPARE_COLUMNS, rows)
    return 0


class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tenfill",
        description="Tensor completion experiments: Bayesian CP with automatic "
                    "rank determination vs. a DCT/lasso slice baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a ground-truth tensor file")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--wafer", action="store_true")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--obs-out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("complete", help="run Bayesian completion on observations")
    p.add_argument("--obs", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    _solver_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("sweep", help="relative error across sampling ratios")
    p.add_argument("--truth", required=True)
    p.add_argument("--ratios", type=_float_list, default=None)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rank-study", help="predicted rank across component budgets")
    p.add_argument("--truth", required=True)
    p.add_argument("--ratio", type=float, default=0.15)
    p.add_argument("--max-ranks", type=_int_list, default=[5, 10, 15, 20, 25])
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_rank_study)

    p = sub.add_parser("compare", help="Bayesian completion vs. slice baseline")
    p.add_argument("--truth", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--vp-max-iters", type=int, default=1000)
    p.add_argument("--out", required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SolverError, OperatorError) as exc:
        print(f"tenfill: solver failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, OSError, TnsFormatError, TnsDataError, TnsBoundsError,
            ValueError, IndexError) as exc:
        print(f"tenfill: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
