"""Experiment protocols: single completions, sampling sweeps, rank studies,
and completion-vs-baseline comparisons, with machine-readable reports.

All protocols derive their randomness (masks, observation noise, solver
initialization) from one master seed via the documented sub-streams, so a
report's config echo reproduces the run bit-for-bit.
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import bayescp, vp
from .core import DenseTensor, relative_error
from .seeding import MASK_STREAM, NOISE_STREAM, SOLVER_STREAM, child_seed
from .synth import NoiseSpec, add_gaussian_noise, observe, sample_mask

__all__ = [
    "ExperimentReport",
    "default_ratio_grid",
    "noisy_observations",
    "complete_experiment",
    "vp_experiment",
    "run_sweep",
    "run_rank_study",
    "run_compare",
]

SWEEP_COLUMNS = ("ratio", "seed", "relative_error", "predicted_rank", "wall_time_seconds")
RANK_STUDY_COLUMNS = ("max_rank", "predicted_rank", "relative_error")
COMPARE_COLUMNS = ("method", "status", "relative_error", "predicted_rank",
                   "iterations", "wall_time_seconds")


@dataclass(frozen=True)
class ExperimentReport:
    """One completed run, with enough config echoed to reproduce it."""

    method: str
    dims: tuple
    sampling_ratio: float | None
    seed: int
    relative_error: float | None
    predicted_rank: int | None
    iterations: int
    wall_time_seconds: float
    config: dict

    def to_dict(self):
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d


def default_ratio_grid(n=10, lo=0.03, hi=0.5):
    """Log-spaced sampling ratios, rounded to 6 decimals."""
    grid = np.exp(np.linspace(np.log(lo), np.log(hi), n))
    return [round(float(g), 6) for g in grid]


def noisy_observations(truth, ratio, seed, snr_db=None, stream_extra=()):
    """Mask the truth uniformly and optionally add noise to the samples.

    The truth tensor itself stays noiseless; noise (when requested)
    lands only on the observed values, emulating imperfect measurement.
    """
    mask = sample_mask(truth.dims, ratio, child_seed(seed, MASK_STREAM, *stream_extra))
    source = truth
    if snr_db is not None:
        source = add_gaussian_noise(truth, NoiseSpec(snr_db=snr_db),
                                    child_seed(seed, NOISE_STREAM, *stream_extra))
    return observe(source, mask)


def complete_experiment(obs, hyper, cfg, truth=None, ratio=None, seed=0):
    """Run the Bayesian completion and wrap it in a report."""
    start = time.perf_counter()
    result = bayescp.run(obs, hyper, cfg)
    wall = time.perf_counter() - start
    rel = None
    if truth is not None:
        rel = relative_error(result.prediction, truth)
    report = ExperimentReport(
        method="bayes-cp",
        dims=tuple(obs.dims),
        sampling_ratio=ratio,
        seed=seed,
        relative_error=rel,
        predicted_rank=result.predicted_rank,
        iterations=result.iterations,
        wall_time_seconds=wall,
        config={
            "max_rank": hyper.max_rank,
            "a0": hyper.a0, "b0": hyper.b0,
            "c0": float(hyper.c0[0]), "d0": float(hyper.d0[0]),
            "tol": cfg.tol, "max_iters": cfg.max_iters,
            "conv_metric": cfg.conv_metric,
            "prune_enabled": cfg.prune_enabled,
            "prune_threshold": cfg.prune_threshold,
            "init_mode": cfg.init_mode, "solver_seed": cfg.seed,
        },
    )
    return result, report


def vp_experiment(obs, cfg, truth=None, ratio=None, seed=0):
    """Run the slice-by-slice baseline and wrap it in a report."""
    start = time.perf_counter()
    if obs.order == 2:
        pred2d, info = vp.vp_recover_slice(obs, cfg)
        prediction = DenseTensor(pred2d)
        iters = info.iterations
    else:
        prediction, iters = vp.vp_recover_stack(obs, cfg)
    wall = time.perf_counter() - start
    rel = None
    if truth is not None:
        rel = relative_error(prediction, truth)
    report = ExperimentReport(
        method="vp",
        dims=tuple(obs.dims),
        sampling_ratio=ratio,
        seed=seed,
        relative_error=rel,
        predicted_rank=None,
        iterations=iters,
        wall_time_seconds=wall,
        config={"lam": cfg.lam, "max_iters": cfg.max_iters, "tol": cfg.tol,
                "cv": cfg.cv, "solver_seed": cfg.seed},
    )
    return prediction, report


def _solver_cfg(base_cfg, seed, *extra):
    return bayescp.SolverConfig(
        max_iters=base_cfg.max_iters,
        tol=base_cfg.tol,
        conv_metric=base_cfg.conv_metric,
        prune_enabled=base_cfg.prune_enabled,
        prune_threshold=base_cfg.prune_threshold,
        seed=child_seed(seed, SOLVER_STREAM, *extra),
        init_mode=base_cfg.init_mode,
    )


def run_sweep(truth, hyper, cfg, seed, ratios=None, reps=1, snr_db=None):
    """One completion per (ratio, repetition); returns sweep-schema rows."""
    ratios = default_ratio_grid() if ratios is None else list(ratios)
    rows = []
    for i, ratio in enumerate(ratios):
        if not 0.0 < ratio <= 1.0:
            raise ValueError(f"sampling ratio must lie in (0, 1], got {ratio}")
        for rep in range(reps):
            obs = noisy_observations(truth, ratio, seed, snr_db=snr_db,
                                     stream_extra=(i, rep))
            run_seed = child_seed(seed, SOLVER_STREAM, i, rep)
            _, report = complete_experiment(
                obs, hyper, _solver_cfg(cfg, seed, i, rep),
                truth=truth, ratio=ratio, seed=run_seed)
            rows.append({
                "ratio": ratio,
                "seed": run_seed,
                "relative_error": report.relative_error,
                "predicted_rank": report.predicted_rank,
                "wall_time_seconds": report.wall_time_seconds,
            })
    return rows


def run_rank_study(truth, cfg, seed, ratio=0.15, max_ranks=(5, 10, 15, 20, 25),
                   snr_db=None, hyper_factory=None):
    """Predicted rank and error for a list of component budgets."""
    if hyper_factory is None:
        hyper_factory = lambda mr: bayescp.HyperParams(max_rank=mr)
    rows = []
    obs = noisy_observations(truth, ratio, seed, snr_db=snr_db)
    for mr in max_ranks:
        _, report = complete_experiment(
            obs, hyper_factory(int(mr)), _solver_cfg(cfg, seed, int(mr)),
            truth=truth, ratio=ratio, seed=seed)
        rows.append({
            "max_rank": int(mr),
            "predicted_rank": report.predicted_rank,
            "relative_error": report.relative_error,
        })
    return rows


def run_compare(truth, hyper, cfg, lasso_cfg, seed, ratio, snr_db=None):
    """Both methods on identical observations; failures stay per-row."""
    obs = noisy_observations(truth, ratio, seed, snr_db=snr_db)
    rows = []

    def attempt(method, runner):
        start = time.perf_counter()
        try:
            rel, rank, iters = runner()
            status = "ok"
        except Exception as exc:  # either method may fail independently
            rel, rank, iters = None, None, 0
            status = f"error: {exc}"
        wall = time.perf_counter() - start
        rows.append({
            "method": method, "status": status, "relative_error": rel,
            "predicted_rank": rank, "iterations": iters,
            "wall_time_seconds": wall,
        })

    def run_tc():
        result = bayescp.run(obs, hyper, _solver_cfg(cfg, seed, 0))
        return (relative_error(result.prediction, truth),
                result.predicted_rank, result.iterations)

    def run_vp():
        prediction, iters = vp.vp_recover_stack(obs, lasso_cfg)
        return relative_error(prediction, truth), None, iters

    attempt("bayes-cp", run_tc)
    attempt("vp", run_vp)
    return rows
