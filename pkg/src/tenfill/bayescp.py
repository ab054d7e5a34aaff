"""Variational Bayesian CP completion with automatic rank determination.

Model: observed entries are noisy evaluations of a CP tensor,

    y_i ~ N( <u_{1,i_1}, ..., u_{d,i_d}>, 1/tau ),   i in the observed set,

with a zero-mean Gaussian prior on every factor row whose per-component
precisions ``lambda_j`` follow Gamma hyper-priors (as does the noise
precision ``tau``).  Inference is mean-field coordinate ascent over the
factorized posterior

    q = prod_k prod_{i_k} N(u_{k,i_k} | m, V) * prod_j Ga(lambda_j) * Ga(tau),

using the closed-form conjugate optima for each block.  Every update
maximizes the evidence lower bound over its own block, so the ELBO is
non-decreasing across updates; ``compute_elbo`` evaluates the bound in
closed form and doubles as the convergence metric.  Components whose
posterior-mean power collapses relative to the strongest component are
pruned, which is what exposes the effective tensor rank.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import digamma, gammaln

from .core import CpModel, DenseTensor, cp_reconstruct
from .errors import SolverError
from .seeding import INIT_STREAM, RESTART_STREAM, child_seed, substream

__all__ = [
    "HyperParams",
    "SolverConfig",
    "PosteriorState",
    "CompletionResult",
    "init_state",
    "update_factor",
    "update_lambda",
    "update_tau",
    "compute_elbo",
    "prune_components",
    "run",
    "predicted_rank",
]

_LN2PI = math.log(2.0 * math.pi)
_RATE_FLOOR = 1e-12
_JITTERS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)
_CHUNK = 1 << 16


@dataclass(frozen=True)
class HyperParams:
    """Gamma hyper-priors (shape--rate) and the component budget.

    ``a0``/``b0`` parameterize the noise-precision prior; ``c0``/``d0``
    the per-component precision priors (scalars broadcast to
    ``max_rank``).  Defaults are broad and uninformative.
    """

    max_rank: int
    a0: float = 1e-6
    b0: float = 1e-6
    c0: float | np.ndarray = 1e-6
    d0: float | np.ndarray = 1e-6

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("a0 and b0 must be strictly positive")
        for name in ("c0", "d0"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=np.float64),
                                  (self.max_rank,)).copy()
            if not np.all(arr > 0):
                raise ValueError(f"{name} entries must be strictly positive")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration control, pruning, and initialization choices.

    The iteration budget is generous because automatic rank determination
    has a slow mass-transfer phase when two components start out fitting
    the same direction; stopping at a few hundred sweeps can freeze such
    duplicates into the reported rank.  Runs that converge stop early.
    ``n_restarts`` reruns the ascent from independent initializations and
    keeps the solution with the highest final bound, the usual guard
    against coordinate-ascent local optima: the first start uses
    ``init_mode``, later starts draw random initializations.  Spectral
    (scaled leading singular vectors of the zero-filled unfoldings) is
    the default first start; it is markedly more reliable than a random
    start on weakly observed or offset-dominated data.
    """

    max_iters: int = 2000
    tol: float = 1e-6
    conv_metric: str = "elbo"  # or "recon"
    prune_enabled: bool = True
    prune_threshold: float = 1e-2
    seed: int = 0
    init_mode: str = "spectral"  # or "random"
    n_restarts: int = 3
    # subtract the observed mean before inference and add it back onto the
    # prediction; helps data with a dominant offset (the factor prior is
    # zero-mean), off by default
    center: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.conv_metric not in ("elbo", "recon"):
            raise ValueError(f"unknown convergence metric {self.conv_metric!r}")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        if self.init_mode not in ("random", "spectral"):
            raise ValueError(f"unknown init mode {self.init_mode!r}")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


class _ObsCache:
    """Zero-based index arrays plus per-mode segment info for row sums.

    For every mode the observations are pre-sorted by that mode's row, so
    per-row sums reduce to ``np.add.reduceat`` over contiguous segments.
    """

    __slots__ = ("source", "idx0", "y", "sorted_idx0", "sorted_y", "starts", "rows")

    def __init__(self, obs):
        self.source = obs
        self.idx0 = np.ascontiguousarray(obs.indices - 1, dtype=np.int64)
        self.y = np.asarray(obs.values, dtype=np.float64)
        self.sorted_idx0, self.sorted_y, self.starts, self.rows = [], [], [], []
        for k in range(obs.order):
            order = np.argsort(self.idx0[:, k], kind="stable")
            sidx = np.ascontiguousarray(self.idx0[order])
            srows = sidx[:, k]
            starts = np.flatnonzero(np.r_[True, np.diff(srows) != 0])
            self.sorted_idx0.append(sidx)
            self.sorted_y.append(self.y[order])
            self.starts.append(starts)
            self.rows.append(srows[starts])


@dataclass
class PosteriorState:
    """Variational posterior over factors, precisions, and noise.

    ``means[k]`` is ``(n_k, r)``; ``covs[k]`` is ``(n_k, r, r)`` with one
    SPD row covariance per factor row.  ``lam_shape``/``lam_rate`` and
    ``tau_shape``/``tau_rate`` are the Gamma posterior parameters; the
    matching prior vectors ride along so pruning keeps them aligned.
    """

    dims: tuple
    means: list
    covs: list
    lam_shape: np.ndarray
    lam_rate: np.ndarray
    tau_shape: float
    tau_rate: float
    prior_a0: float
    prior_b0: float
    prior_lam_shape: np.ndarray
    prior_lam_rate: np.ndarray
    elbo_trace: list = field(default_factory=list)
    _cache: object = field(default=None, repr=False)
    # expected-residual memo: valid until a factor block changes
    _resid_memo: object = field(default=None, repr=False)

    @property
    def rank(self):
        return int(self.means[0].shape[1])

    @property
    def order(self):
        return len(self.dims)

    @property
    def expected_tau(self):
        return float(self.tau_shape / self.tau_rate)

    @property
    def expected_lambda(self):
        return self.lam_shape / self.lam_rate

    def mean_model(self):
        return CpModel([m.copy() for m in self.means])


@dataclass(frozen=True)
class CompletionResult:
    """Prediction is the reconstructed posterior-mean CP model, shifted by
    ``offset`` when observation centering was requested (0 otherwise)."""

    prediction: object
    model: CpModel
    predicted_rank: int
    iterations: int
    final_elbo: float
    expected_tau: float
    expected_lambda: np.ndarray
    converged: bool
    offset: float = 0.0


def _cache_for(state, obs):
    cache = state._cache
    if cache is None or cache.source is not obs:
        if tuple(obs.dims) != tuple(state.dims):
            raise ValueError(f"observation extents {obs.dims} do not match "
                             f"state extents {state.dims}")
        cache = _ObsCache(obs)
        state._cache = cache
    return cache


def _second_moments(state, k):
    m = state.means[k]
    return m[:, :, None] * m[:, None, :] + state.covs[k]


def _packed_moments(state, k, iu):
    """Upper triangle of the row second-moment matrices, shape (n_k, P).

    The factor-update and residual accumulations only ever form Hadamard
    products and sums of these symmetric matrices, so carrying the packed
    triangle halves the traffic through the hot loops.
    """
    m = state.means[k]
    return m[:, iu[0]] * m[:, iu[1]] + state.covs[k][:, iu[0], iu[1]]


def _product_over_modes(state, idx, skip, iu):
    """Row-wise products of factor means and packed second moments across
    all modes except ``skip`` (use ``skip=-1`` for all modes), evaluated
    at the observation index rows ``idx``.

    Returns ``(w, s2p)`` with ``w`` of shape (N, r) and ``s2p`` of shape
    (N, P); both start as gather copies, so the in-place accumulation
    never aliases state arrays.
    """
    w = None
    s2p = None
    for m in range(state.order):
        if m == skip:
            continue
        rows = idx[:, m]
        mom = _packed_moments(state, m, iu)
        if w is None:
            w = state.means[m][rows]
            s2p = mom[rows]
        else:
            w *= state.means[m][rows]
            s2p *= mom[rows]
    return w, s2p


def init_state(obs, hyper, cfg):
    """Posterior at full component budget, Gamma blocks at their priors.

    Random mode draws factor rows i.i.d. normal scaled so a rank-1
    product matches the spread of the observed values; spectral mode
    seeds each mode with scaled leading singular vectors of the
    zero-filled unfolding.  Row covariances start at identity.
    """
    if len(obs) < 1:
        raise ValueError("cannot initialize from an empty observation set")
    dims = tuple(obs.dims)
    d = len(dims)
    r = hyper.max_rank
    rng = substream(cfg.seed, INIT_STREAM)
    y = np.asarray(obs.values)
    spread = float(np.std(y))
    if spread <= 0.0:
        # constant observations: fall back to their RMS so the factors start live
        spread = max(float(np.sqrt(np.mean(y * y))), 1.0)
    scale = spread ** (1.0 / d)
    means = []
    if cfg.init_mode == "random":
        for n in dims:
            means.append(scale * rng.standard_normal((n, r)))
    else:
        dense = np.zeros(dims)
        dense[tuple((obs.indices - 1).T)] = y
        for k, n in enumerate(dims):
            unfold = np.moveaxis(dense, k, 0).reshape(n, -1)
            u, s, _ = np.linalg.svd(unfold, full_matrices=False)
            cols = min(r, u.shape[1])
            block = u[:, :cols] * np.sqrt(s[:cols])[None, :]
            if cols < r:
                block = np.hstack([block, scale * rng.standard_normal((n, r - cols))])
            means.append(block)
    covs = [np.tile(np.eye(r), (n, 1, 1)) for n in dims]
    state = PosteriorState(
        dims=dims,
        means=means,
        covs=covs,
        lam_shape=hyper.c0.copy(),
        lam_rate=hyper.d0.copy(),
        tau_shape=float(hyper.a0),
        tau_rate=float(hyper.b0),
        prior_a0=float(hyper.a0),
        prior_b0=float(hyper.b0),
        prior_lam_shape=hyper.c0.copy(),
        prior_lam_rate=hyper.d0.copy(),
    )
    _cache_for(state, obs)
    return state


def _spd_inverse_rows(P, mode_1based, rows_hint=None):
    """Batched inverse of SPD matrices via Cholesky with jitter escalation."""
    r = P.shape[-1]
    eye = np.eye(r)
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        L = np.empty_like(P)
        for i in range(P.shape[0]):
            scale = 1.0 + float(np.max(np.abs(np.diagonal(P[i]))))
            for jit in _JITTERS:
                try:
                    L[i] = np.linalg.cholesky(P[i] + jit * scale * eye)
                    break
                except np.linalg.LinAlgError:
                    continue
            else:
                row = i if rows_hint is None else int(rows_hint[i])
                raise SolverError(
                    f"posterior precision for mode {mode_1based}, row {row + 1} "
                    f"is not positive definite", mode=mode_1based, row=row + 1)
    linv = np.linalg.solve(L, np.broadcast_to(eye, P.shape).copy())
    V = np.matmul(linv.transpose(0, 2, 1), linv)
    return 0.5 * (V + V.transpose(0, 2, 1))


def update_factor(state, obs, k):
    """Closed-form mean-field update of every row of mode ``k`` (1-based).

    Row precision: ``E[tau] * sum_i had_{m!=k}(mm^T + V) + diag(E[lambda])``
    over observations covering the row; mean: ``E[tau] * V * sum_i y_i *
    had_{m!=k} m``.  Rows with no observations revert to the prior.
    """
    d = state.order
    if not 1 <= k <= d:
        raise ValueError(f"mode {k} out of range 1..{d}")
    cache = _cache_for(state, obs)
    k0 = k - 1
    r = state.rank
    n_k = state.dims[k0]
    sidx = cache.sorted_idx0[k0]
    iu = np.triu_indices(r)

    if d == 1:
        # empty Hadamard product: ones, matching <u> = sum_j u_j
        n_obs = sidx.shape[0]
        w = np.ones((n_obs, r))
        s2p = np.ones((n_obs, iu[0].size))
    else:
        w, s2p = _product_over_modes(state, sidx, k0, iu)

    starts = cache.starts[k0]
    present = cache.rows[k0]
    A = np.zeros((n_k, r, r))
    packed = np.add.reduceat(s2p, starts, axis=0)
    A[present[:, None], iu[0][None, :], iu[1][None, :]] = packed
    A[present[:, None], iu[1][None, :], iu[0][None, :]] = packed
    rhs = np.zeros((n_k, r))
    rhs[present] = np.add.reduceat(cache.sorted_y[k0][:, None] * w, starts, axis=0)

    e_tau = state.expected_tau
    P = e_tau * A + np.diag(state.expected_lambda)[None, :, :]
    V = _spd_inverse_rows(P, k)
    state.covs[k0] = V
    state.means[k0] = e_tau * np.matmul(V, rhs[:, :, None])[:, :, 0]
    state._resid_memo = None
    return state


def update_lambda(state):
    """Conjugate update of the per-component precision posteriors.

    Shapes gain half the total row count ``sum_k n_k``; rates gain half
    the expected squared column mass across all modes.
    """
    total_rows = float(sum(state.dims))
    mass = np.zeros(state.rank)
    for k in range(state.order):
        m = state.means[k]
        diag = np.diagonal(state.covs[k], axis1=1, axis2=2)
        mass += np.sum(m * m + diag, axis=0)
    state.lam_shape = state.prior_lam_shape + 0.5 * total_rows
    state.lam_rate = np.maximum(state.prior_lam_rate + 0.5 * mass, _RATE_FLOOR)
    return state


def _expected_residual_sq(state, cache):
    """Sum over observations of E[(y - <u_1,...,u_d>)^2] under q.

    Memoized on the state: factor updates invalidate it, the Gamma-block
    updates do not (the residual depends only on the factor moments).
    """
    memo = state._resid_memo
    if memo is not None and memo[0] is cache:
        return memo[1]
    r = state.rank
    iu = np.triu_indices(r)
    # off-diagonal packed entries count twice in the full-matrix sum
    weights = np.where(iu[0] == iu[1], 1.0, 2.0)
    total = 0.0
    for lo in range(0, cache.y.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, cache.y.shape[0])
        w, s2p = _product_over_modes(state, cache.idx0[lo:hi], -1, iu)
        p = w.sum(axis=1)
        s = s2p @ weights
        yv = cache.y[lo:hi]
        # (y - E<.>)^2 + Var<.>; the variance clip only absorbs roundoff
        total += float(np.sum((yv - p) ** 2 + np.maximum(s - p * p, 0.0)))
    state._resid_memo = (cache, total)
    return total


def update_tau(state, obs):
    """Conjugate update of the noise-precision posterior."""
    cache = _cache_for(state, obs)
    resid = _expected_residual_sq(state, cache)
    state.tau_shape = state.prior_a0 + 0.5 * cache.y.shape[0]
    rate = state.prior_b0 + 0.5 * resid
    if not np.isfinite(rate) or rate <= 0.0:
        raise SolverError(f"noise-precision rate degenerated to {rate!r}")
    state.tau_rate = max(rate, _RATE_FLOOR)
    return state


def compute_elbo(state, obs):
    """Evidence lower bound of the current posterior, in closed form."""
    cache = _cache_for(state, obs)
    n_obs = cache.y.shape[0]
    r = state.rank
    a, b = state.tau_shape, state.tau_rate
    c, dd = state.lam_shape, state.lam_rate
    e_tau = a / b
    e_logtau = float(digamma(a) - math.log(b))
    e_lam = c / dd
    e_loglam = digamma(c) - np.log(dd)

    resid = _expected_residual_sq(state, cache)
    elbo = 0.5 * n_obs * (e_logtau - _LN2PI) - 0.5 * e_tau * resid

    for k in range(state.order):
        n_k = state.dims[k]
        m = state.means[k]
        diag = np.diagonal(state.covs[k], axis1=1, axis2=2)
        mass = np.sum(m * m + diag, axis=0)
        elbo += 0.5 * n_k * float(np.sum(e_loglam)) - 0.5 * n_k * r * _LN2PI
        elbo -= 0.5 * float(np.dot(e_lam, mass))
        sign, logdet = np.linalg.slogdet(state.covs[k])
        if np.any(sign <= 0):
            bad = int(np.argmax(sign <= 0))
            raise SolverError(f"covariance for mode {k + 1}, row {bad + 1} is "
                              f"not positive definite", mode=k + 1, row=bad + 1)
        elbo += 0.5 * n_k * r * (1.0 + _LN2PI) + 0.5 * float(np.sum(logdet))

    c0, d0 = state.prior_lam_shape, state.prior_lam_rate
    elbo += float(np.sum(c0 * np.log(d0) - gammaln(c0)
                         + (c0 - 1.0) * e_loglam - d0 * e_lam))
    a0, b0 = state.prior_a0, state.prior_b0
    elbo += a0 * math.log(b0) - float(gammaln(a0)) + (a0 - 1.0) * e_logtau - b0 * e_tau
    elbo += float(np.sum(c - np.log(dd) + gammaln(c) + (1.0 - c) * digamma(c)))
    elbo += a - math.log(b) + float(gammaln(a)) + (1.0 - a) * float(digamma(a))
    return float(elbo)


def component_power(state):
    """Per-component power ``prod_k ||means_k[:, j]||_2`` (Frobenius norm of
    the rank-1 posterior-mean component)."""
    power = np.ones(state.rank)
    for k in range(state.order):
        power *= np.linalg.norm(state.means[k], axis=0)
    return power


def prune_components(state, threshold=1e-2):
    """Drop components whose power falls below ``threshold`` of the largest.

    Shrinks the factor means/covariances and the lambda posterior (and its
    prior slices) together; never prunes the last surviving component.
    """
    power = component_power(state)
    peak = float(np.max(power)) if power.size else 0.0
    keep = power >= threshold * peak
    if not np.any(keep):
        keep[int(np.argmax(power))] = True
    if np.all(keep):
        return state
    idx = np.flatnonzero(keep)
    state.means = [m[:, idx] for m in state.means]
    state.covs = [v[:, idx][:, :, idx] for v in state.covs]
    state.lam_shape = state.lam_shape[idx]
    state.lam_rate = state.lam_rate[idx]
    state.prior_lam_shape = state.prior_lam_shape[idx]
    state.prior_lam_rate = state.prior_lam_rate[idx]
    state._resid_memo = None
    return state


def run(obs, hyper, cfg, initial_state=None):
    """Coordinate ascent with restarts, keeping the best final bound.

    Each start sweeps {factor updates, noise update, precision update,
    optional pruning} until the relative change of the convergence metric
    drops below ``cfg.tol`` or ``cfg.max_iters`` is reached;
    non-convergence is reported, not raised.  With an explicit
    ``initial_state`` exactly one ascent runs from that state.
    Deterministic for a fixed seed.
    """
    if initial_state is not None:
        return _run_once(obs, hyper, cfg, initial_state)
    offset = 0.0
    if cfg.center:
        from .synth import ObservationSet
        offset = float(np.mean(obs.values))
        obs = ObservationSet(obs.dims, obs.indices, obs.values - offset)
    best = None
    for i in range(cfg.n_restarts):
        cfg_i = replace(cfg, seed=child_seed(cfg.seed, RESTART_STREAM, i),
                        init_mode=cfg.init_mode if i == 0 else "random")
        result = _run_once(obs, hyper, cfg_i, init_state(obs, hyper, cfg_i))
        if best is None or result.final_elbo > best.final_elbo:
            best = result
    if cfg.center:
        best = replace(best,
                       prediction=DenseTensor(best.prediction.values + offset),
                       offset=offset)
    return best


def _run_once(obs, hyper, cfg, state):
    cache = _cache_for(state, obs)
    d = state.order
    converged = False
    sweeps = 0
    prev_metric = None
    prev_recon = None
    for sweep in range(1, cfg.max_iters + 1):
        sweeps = sweep
        for k in range(1, d + 1):
            update_factor(state, obs, k)
        update_tau(state, obs)
        update_lambda(state)
        pruned = False
        if cfg.prune_enabled and sweep > 2:
            before = state.rank
            prune_components(state, cfg.prune_threshold)
            pruned = state.rank != before
        elbo = compute_elbo(state, obs)
        state.elbo_trace.append(elbo)
        if cfg.conv_metric == "elbo":
            metric = elbo
        else:
            recon = cp_reconstruct(state.mean_model()).values
            if prev_recon is not None:
                denom = float(np.linalg.norm(prev_recon)) or 1.0
                metric = float(np.linalg.norm(recon - prev_recon)) / denom
            else:
                metric = None
            prev_recon = recon
        if pruned:
            prev_metric = None
            continue
        if cfg.conv_metric == "elbo":
            if prev_metric is not None:
                if abs(metric - prev_metric) <= cfg.tol * max(abs(prev_metric), 1.0):
                    converged = True
                    break
            prev_metric = metric
        else:
            if metric is not None and metric <= cfg.tol:
                converged = True
                break
    model = state.mean_model()
    prediction = cp_reconstruct(model)
    return CompletionResult(
        prediction=prediction,
        model=model,
        predicted_rank=state.rank,
        iterations=sweeps,
        final_elbo=state.elbo_trace[-1] if state.elbo_trace else float("nan"),
        expected_tau=state.expected_tau,
        expected_lambda=state.expected_lambda.copy(),
        converged=converged,
    )


def predicted_rank(result):
    """Components surviving after the final pruning."""
    return int(result.predicted_rank)
