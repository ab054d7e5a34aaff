"""Slice-by-slice compressed-sensing baseline: DCT basis + l1 recovery.

Each 2-D slice is modeled as a sparse combination of orthonormal 2-D
DCT-II basis images; the coefficients are recovered from the observed
cells by FISTA on ``min 0.5*||A c - y||^2 + lam*||c||_1``.  The sensing
operator is an orthonormal synthesis followed by coordinate subsampling,
so its spectral norm is 1 and FISTA runs with a fixed unit step.

Kept in operator form throughout: the classic formulation that
materializes the ``N x (n1*n2)`` sensing matrix exhausts memory once
slices get large, which is a documented practical limitation of the
approach, not something this implementation reproduces.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import DenseTensor
from .errors import OperatorError, SolverError
from .seeding import CV_STREAM, substream
from .synth import ObservationSet

__all__ = [
    "DctBasis2D",
    "LassoConfig",
    "FistaInfo",
    "dct_matrix",
    "fista_lasso",
    "vp_recover_slice",
    "vp_recover_stack",
]


def dct_matrix(n):
    """Orthonormal DCT-II analysis matrix.

    Row 1 is the constant ``1/sqrt(n)``; row ``p > 1`` has entries
    ``sqrt(2/n) * cos(pi*(p-1)*(2q-1)/(2n))`` for columns ``q = 1..n``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    p = np.arange(n)[:, None]
    q = np.arange(n)[None, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * p * (2 * q + 1) / (2.0 * n))
    mat[0, :] = 1.0 / np.sqrt(n)
    return mat


class DctBasis2D:
    """Separable orthonormal 2-D DCT basis for ``n1 x n2`` slices.

    ``C1``/``C2`` hold the basis vectors in their columns, so analysis of
    a slice ``S`` is ``C1.T @ S @ C2`` and synthesis of coefficients
    ``Chat`` is ``C1 @ Chat @ C2.T``.
    """

    __slots__ = ("n1", "n2", "C1", "C2")

    def __init__(self, n1, n2):
        self.n1 = int(n1)
        self.n2 = int(n2)
        self.C1 = dct_matrix(self.n1).T
        self.C2 = dct_matrix(self.n2).T

    def analyze(self, slice2d):
        return self.C1.T @ slice2d @ self.C2

    def synthesize(self, coeffs):
        return self.C1 @ coeffs @ self.C2.T


@dataclass(frozen=True)
class LassoConfig:
    """FISTA settings.  ``lam=None`` selects ``0.01 * ||A^T y||_inf``.

    The step size is fixed at 1: the operators this package passes in are
    orthonormal syntheses followed by subsampling, whose Lipschitz
    constant is exactly 1.  ``cv=True`` picks ``lam`` by seeded k-fold
    cross-validation over a log grid instead.
    """

    lam: float | None = None
    max_iters: int = 1000
    tol: float = 1e-9
    cv: bool = False
    cv_folds: int = 5
    cv_grid: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class FistaInfo:
    objectives: tuple
    iterations: int
    converged: bool
    kkt_residual: float
    lam: float


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _check_adjoint(apply_A, apply_At, y):
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(apply_At(np.zeros_like(y)).shape)
    z = rng.standard_normal(np.shape(y))
    lhs = float(np.vdot(apply_A(x), z))
    rhs = float(np.vdot(x, apply_At(z)))
    scale = max(abs(lhs), abs(rhs), 1e-30)
    if abs(lhs - rhs) / scale > 1e-8:
        raise OperatorError(f"apply_A/apply_At are not adjoint: <Ax,z>={lhs!r} "
                            f"vs <x,A^T z>={rhs!r}")


def _kkt_residual(c, grad, lam):
    on = c != 0
    res = 0.0
    if np.any(on):
        res = float(np.max(np.abs(grad[on] + lam * np.sign(c[on]))))
    if np.any(~on):
        res = max(res, float(np.max(np.maximum(np.abs(grad[~on]) - lam, 0.0))))
    return res


def fista_lasso(apply_A, apply_At, y, cfg, return_info=False):
    """Monotone FISTA for ``min 0.5*||A c - y||^2 + lam*||c||_1``.

    The objective never increases between iterations (restart-on-increase
    variant); termination is relative objective change below ``cfg.tol``
    or ``cfg.max_iters``.  A randomized adjoint-consistency probe runs
    before iterating and raises :class:`OperatorError` on mismatch.
    """
    y = np.asarray(y, dtype=np.float64)
    _check_adjoint(apply_A, apply_At, y)
    aty = apply_At(y)
    lam = cfg.lam
    if lam is None:
        lam = 0.01 * float(np.max(np.abs(aty)))

    def objective(c, resid):
        return 0.5 * float(np.sum(resid * resid)) + lam * float(np.sum(np.abs(c)))

    x = np.zeros_like(aty)
    x_resid = apply_A(x) - y
    fx = objective(x, x_resid)
    zk = x
    t = 1.0
    objs = [fx]
    converged = False
    iters = 0
    for it in range(cfg.max_iters):
        iters = it + 1
        grad = apply_At(apply_A(zk) - y)
        u = _soft(zk - grad, lam)
        u_resid = apply_A(u) - y
        fu = objective(u, u_resid)
        x_prev, f_prev = x, fx
        accepted = fu <= fx
        if accepted:
            x, fx = u, fu
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        zk = x + (t / t_next) * (u - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        objs.append(fx)
        # a rejected step keeps the objective flat; only an accepted step
        # with a genuinely tiny improvement signals convergence
        if accepted and abs(f_prev - fx) <= cfg.tol * max(abs(f_prev), 1.0):
            converged = True
            break
    if return_info:
        grad = apply_At(apply_A(x) - y)
        info = FistaInfo(objectives=tuple(objs), iterations=iters,
                         converged=converged,
                         kkt_residual=_kkt_residual(x, grad, lam), lam=lam)
        return x, info
    return x


def _slice_operators(basis, rows0, cols0):
    def apply_A(coeffs):
        return basis.synthesize(coeffs)[rows0, cols0]

    def apply_At(vec):
        scatter = np.zeros((basis.n1, basis.n2))
        scatter[rows0, cols0] = vec
        return basis.analyze(scatter)

    return apply_A, apply_At


def _cross_validate_lam(basis, rows0, cols0, vals, cfg):
    rng = substream(cfg.seed, CV_STREAM)
    n = len(vals)
    folds = max(2, min(cfg.cv_folds, n))
    perm = rng.permutation(n)
    apply_A_full, apply_At_full = _slice_operators(basis, rows0, cols0)
    lam_max = float(np.max(np.abs(apply_At_full(vals))))
    grid = lam_max * np.logspace(-4, -0.5, cfg.cv_grid)
    scores = np.zeros(len(grid))
    for f in range(folds):
        hold = perm[f::folds]
        train = np.setdiff1d(perm, hold)
        a_tr, at_tr = _slice_operators(basis, rows0[train], cols0[train])
        for g, lam in enumerate(grid):
            c = fista_lasso(a_tr, at_tr, vals[train], replace(cfg, lam=float(lam), cv=False))
            pred = basis.synthesize(c)[rows0[hold], cols0[hold]]
            scores[g] += float(np.mean((pred - vals[hold]) ** 2))
    return float(grid[int(np.argmin(scores))])


def vp_recover_slice(obs2d, cfg):
    """Recover one ``n1 x n2`` slice from its observed cells.

    Solves the lasso whose operator is 2-D DCT synthesis followed by
    subsampling at the observed cells, then synthesizes the full slice.
    Deterministic; the only randomness is the seeded cross-validation
    split when ``cfg.cv`` is on.
    """
    if obs2d.order != 2:
        raise ValueError(f"slice recovery needs order-2 observations, got order {obs2d.order}")
    n1, n2 = obs2d.dims
    basis = DctBasis2D(n1, n2)
    rows0 = obs2d.indices[:, 0] - 1
    cols0 = obs2d.indices[:, 1] - 1
    if cfg.cv:
        cfg = replace(cfg, lam=_cross_validate_lam(basis, rows0, cols0, obs2d.values, cfg), cv=False)
    apply_A, apply_At = _slice_operators(basis, rows0, cols0)
    coeffs, info = fista_lasso(apply_A, apply_At, obs2d.values, cfg, return_info=True)
    return basis.synthesize(coeffs), info


def max_threads():
    """Worker cap from TENFILL_THREADS (0 or 1 means sequential)."""
    raw = os.environ.get("TENFILL_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def vp_recover_stack(obs3d, cfg):
    """Recover an order-3 tensor slice-by-slice along the last mode.

    Slices are independent lasso problems; slices with no observations
    come back all-zero with a warning.  With ``TENFILL_THREADS > 1``
    slices solve in a thread pool (results are identical to the
    sequential schedule).
    """
    if obs3d.order != 3:
        raise ValueError(f"stack recovery needs order-3 observations, got order {obs3d.order}")
    n1, n2, n3 = obs3d.dims
    out = np.zeros((n1, n2, n3))
    total_iters = 0
    per_slice = []
    for s in range(1, n3 + 1):
        sel = obs3d.indices[:, 2] == s
        if not np.any(sel):
            warnings.warn(f"slice {s} has no observations; returning zeros", stacklevel=2)
            per_slice.append(None)
        else:
            per_slice.append((obs3d.indices[sel][:, :2], obs3d.values[sel]))

    def solve(s):
        entry = per_slice[s - 1]
        if entry is None:
            return np.zeros((n1, n2)), None
        idx2, vals = entry
        try:
            return vp_recover_slice(ObservationSet((n1, n2), idx2, vals), cfg)
        except Exception as exc:
            raise SolverError(f"slice {s}: {exc}") from exc

    workers = max_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, range(1, n3 + 1)))
    else:
        results = [solve(s) for s in range(1, n3 + 1)]
    for s, (slice2d, info) in enumerate(results, start=1):
        out[:, :, s - 1] = slice2d
        if info is not None:
            total_iters += info.iterations
    return DenseTensor(out), total_iters
