"""Seeded generators for ground-truth tensors, noise, and observation masks.

Stands in for measurement campaigns: low-rank CP tensors with Gaussian
factors, a wafer-like stack of polynomial die surfaces, uniform sampling
masks, and SNR-calibrated additive noise.  Every generator is a pure
function of its arguments and the seed (see :mod:`tenfill.seeding`).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import CpModel, DenseTensor, cp_reconstruct, frobenius_norm
from .errors import DomainError
from .seeding import FACTOR_STREAM, MASK_STREAM, NOISE_STREAM, WAFER_STREAM, substream

__all__ = [
    "ObservationSet",
    "NoiseSpec",
    "WaferParams",
    "random_cp_tensor",
    "add_gaussian_noise",
    "sample_mask",
    "observe",
    "wafer_pattern",
    "wafer_base_surface",
]


class ObservationSet:
    """Sparse list of observed entries over an index set.

    ``indices`` is an ``(N, d)`` int array of 1-based multi-indices,
    ``values`` the matching measurements.  Indices must be unique, within
    the extents, and non-empty.
    """

    __slots__ = ("dims", "indices", "values")

    def __init__(self, dims, indices, values):
        dims = tuple(int(n) for n in dims)
        indices = np.array(indices, dtype=np.int64, order="C")
        values = np.array(values, dtype=np.float64)
        if indices.ndim == 1:
            indices = indices.reshape(1, -1)
        if len(dims) < 1 or any(n < 1 for n in dims):
            raise ValueError(f"invalid extents {dims}")
        if indices.ndim != 2 or indices.shape[1] != len(dims):
            raise ValueError(f"index array shape {indices.shape} does not match "
                             f"order-{len(dims)} extents")
        n = indices.shape[0]
        if n < 1:
            raise ValueError("an observation set needs at least one entry")
        if values.shape != (n,):
            raise ValueError(f"got {n} indices but {values.shape} values")
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        if np.any(indices < 1) or np.any(indices > np.asarray(dims)):
            raise IndexError(f"observation indices out of bounds for extents {dims}")
        lin = np.ravel_multi_index((indices - 1).T, dims)
        if np.unique(lin).size != n:
            raise ValueError("observation indices must be unique")
        indices.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("ObservationSet is immutable")

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __len__(self):
        return int(self.indices.shape[0])

    @property
    def order(self):
        return len(self.dims)

    def entries(self):
        """Iterate (multi-index tuple, value) pairs."""
        for row, v in zip(self.indices, self.values):
            yield tuple(int(i) for i in row), float(v)

    @classmethod
    def from_pairs(cls, dims, pairs):
        pairs = list(pairs)
        idx = [p[0] for p in pairs]
        vals = [p[1] for p in pairs]
        return cls(dims, np.asarray(idx), np.asarray(vals))

    def __repr__(self):
        return f"ObservationSet(dims={self.dims}, n={len(self)})"


@dataclass(frozen=True)
class NoiseSpec:
    """Additive i.i.d. Gaussian noise, given either as an SNR or a precision.

    Exactly one of ``snr_db`` and ``tau`` must be set.  ``tau`` is the
    precision (1/variance); ``tau = inf`` requests exact passthrough.
    """

    snr_db: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if (self.snr_db is None) == (self.tau is None):
            raise ValueError("set exactly one of snr_db and tau")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def mode(self):
        return "snr" if self.snr_db is not None else "tau"


def random_cp_tensor(dims, rank, seed):
    """Ground-truth CP tensor with i.i.d. standard-normal factor entries.

    Returns the model and its dense reconstruction.  Identical
    ``(dims, rank, seed)`` give bitwise-identical output.  Requested ranks
    above the generic maximal CP rank (product of all extents except the
    largest) only trigger a warning, since CP rank may exceed any single
    extent.
    """
    dims = tuple(int(n) for n in dims)
    rank = int(rank)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if len(dims) < 1 or any(n < 1 for n in dims):
        raise ValueError(f"invalid extents {dims}")
    bound = 1
    skip = int(np.argmax(dims))
    for k, n in enumerate(dims):
        if k != skip:
            bound *= n
    if rank > bound:
        warnings.warn(f"rank {rank} exceeds the generic maximal CP rank "
                      f"{bound} for extents {dims}", stacklevel=2)
    rng = substream(seed, FACTOR_STREAM)
    factors = [rng.standard_normal((n, rank)) for n in dims]
    model = CpModel(factors)
    return model, cp_reconstruct(model)


def add_gaussian_noise(x, spec, seed):
    """Return ``x`` plus i.i.d. centered Gaussian noise.

    In SNR mode the variance is ``(||x||_F^2 / prod(dims)) * 10^(-snr/10)``,
    i.e. the SNR is measured against the mean square of the signal.
    """
    if spec.mode == "snr":
        power = frobenius_norm(x) ** 2 / x.values.size
        if power == 0.0:
            raise DomainError("SNR is undefined for an all-zero signal")
        sigma = math.sqrt(power * 10.0 ** (-spec.snr_db / 10.0))
    else:
        if math.isinf(spec.tau):
            return DenseTensor(x.values)
        sigma = 1.0 / math.sqrt(spec.tau)
    rng = substream(seed, NOISE_STREAM)
    eps = rng.standard_normal(x.dims)
    return DenseTensor(x.values + sigma * eps)


def _round_half_away(x):
    return int(math.floor(x + 0.5))


def sample_mask(dims, ratio, seed):
    """Uniform without-replacement mask of exactly round(ratio * total) cells.

    Uses a partial Fisher-Yates shuffle of the row-major linearized index
    space, so any ratio yields an exact count with uniform inclusion
    probabilities.  Returns an ``(N, d)`` array of 1-based multi-indices in
    draw order; never fewer than one index.
    """
    dims = tuple(int(n) for n in dims)
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must lie in (0, 1], got {ratio}")
    total = int(np.prod(dims))
    count = max(1, _round_half_away(ratio * total))
    count = min(count, total)
    rng = substream(seed, MASK_STREAM)
    pool = np.arange(total, dtype=np.int64)
    draws = rng.integers(np.arange(count), total)
    for i in range(count):
        j = draws[i]
        pool[i], pool[j] = pool[j], pool[i]
    picked = pool[:count]
    coords = np.unravel_index(picked, dims)
    return (np.stack(coords, axis=1) + 1).astype(np.int64)


def observe(truth, mask):
    """Read truth values at the masked (1-based) indices."""
    idx = np.asarray(mask, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx.reshape(1, -1)
    dims = truth.dims
    if idx.shape[1] != len(dims):
        raise ValueError(f"mask arity {idx.shape[1]} does not match order {len(dims)}")
    if np.any(idx < 1) or np.any(idx > np.asarray(dims)):
        raise IndexError(f"mask index out of bounds for extents {dims}")
    vals = truth.values[tuple((idx - 1).T)]
    return ObservationSet(dims, idx, vals)


@dataclass(frozen=True)
class WaferParams:
    """Controls for the wafer-like stack generator.

    ``gains``/``offsets``, when given, override the random per-die draws
    (useful for constructing exact identities).
    """

    degree: int = 2
    gain_spread: float = 0.25
    offset_spread: float = 0.5
    roughness: float = 0.02
    gains: tuple | None = None
    offsets: tuple | None = None


def wafer_base_surface(n1, n2, seed, degree=2):
    """The smooth polynomial surface shared by all dies of one wafer draw."""
    rng = substream(seed, WAFER_STREAM, 0)
    x = np.linspace(-1.0, 1.0, n1)[:, None]
    y = np.linspace(-1.0, 1.0, n2)[None, :]
    surf = np.zeros((n1, n2))
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            coef = rng.standard_normal() / (1.0 + p + q)
            surf += coef * (x ** p) * (y ** q)
    return surf


def wafer_pattern(dims3, params, seed):
    """Stack of dies: shared smooth surface, per-die gain/offset, roughness.

    Each die slice is ``gain_i * base + offset_i`` plus i.i.d. Gaussian
    roughness, which is smooth within a die but non-smooth along the die
    axis.  Only 3-way extents are accepted.
    """
    dims3 = tuple(int(n) for n in dims3)
    if len(dims3) != 3:
        raise ValueError(f"wafer pattern needs 3-way extents, got {dims3}")
    n1, n2, n3 = dims3
    base = wafer_base_surface(n1, n2, seed, degree=params.degree)
    if params.gains is not None:
        gains = np.asarray(params.gains, dtype=np.float64)
        if gains.shape != (n3,):
            raise ValueError(f"need {n3} gains, got {gains.shape}")
    else:
        rng = substream(seed, WAFER_STREAM, 1)
        gains = 1.0 + params.gain_spread * rng.standard_normal(n3)
    if params.offsets is not None:
        offsets = np.asarray(params.offsets, dtype=np.float64)
        if offsets.shape != (n3,):
            raise ValueError(f"need {n3} offsets, got {offsets.shape}")
    else:
        rng = substream(seed, WAFER_STREAM, 2)
        offsets = params.offset_spread * rng.standard_normal(n3)
    stack = gains[None, None, :] * base[:, :, None] + offsets[None, None, :]
    if params.roughness > 0:
        rng = substream(seed, WAFER_STREAM, 3)
        stack = stack + params.roughness * rng.standard_normal(dims3)
    return DenseTensor(stack)
