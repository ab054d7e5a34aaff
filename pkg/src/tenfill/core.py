"""Dense tensors, CP models, and the inner-product/norm primitives.

Conventions used across the package:

* multi-indices are 1-based tuples ``(i_1, ..., i_d)`` at every public
  boundary; linearization is row-major (last index fastest),
* reductions run in 64-bit floats, sequentially in canonical index order,
  so repeated calls are bit-identical and the documented hand examples
  reproduce exactly.
"""

import numpy as np

from .errors import DomainError, ModelError, ShapeError

__all__ = [
    "DenseTensor",
    "CpModel",
    "inner_product",
    "generalized_inner_product",
    "frobenius_norm",
    "cp_evaluate_entry",
    "cp_reconstruct",
    "relative_error",
]


def _seq_sum(a):
    """Left-to-right sequential sum of a raveled float64 array."""
    flat = np.ascontiguousarray(a, dtype=np.float64).ravel()
    if flat.size == 0:
        return 0.0
    return float(np.cumsum(flat)[-1])


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, order="C")
    arr.setflags(write=False)
    return arr


class DenseTensor:
    """A d-dimensional real array with explicit extents.

    Values are stored as a read-only, C-ordered float64 array; ``data``
    exposes the row-major linear order.  Missing entries, when the masked
    mode is requested, live in a separate boolean array (``True`` marks
    a missing cell); the value array itself must always be finite.
    """

    __slots__ = ("values", "missing")

    def __init__(self, values, missing=None):
        values = _frozen(values)
        if values.ndim < 1:
            values = values.reshape(1)
        if any(n < 1 for n in values.shape):
            raise ValueError(f"every extent must be >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor values must be finite (mark missing cells "
                             "via the separate boolean mask, not NaN)")
        if missing is not None:
            missing = np.array(missing, dtype=bool, order="C")
            if missing.shape != values.shape:
                raise ShapeError(f"missing mask shape {missing.shape} does not "
                                 f"match value shape {values.shape}")
            missing.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    def __setattr__(self, name, value):
        raise AttributeError("DenseTensor is immutable")

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    @classmethod
    def from_flat(cls, dims, data, missing=None):
        """Build from extents plus values in row-major linear order."""
        dims = tuple(int(n) for n in dims)
        data = np.asarray(data, dtype=np.float64).ravel()
        total = int(np.prod(dims)) if dims else 0
        if len(dims) < 1 or any(n < 1 for n in dims):
            raise ValueError(f"invalid extents {dims}")
        if data.size != total:
            raise ValueError(f"data length {data.size} does not equal the "
                             f"product of extents {dims} = {total}")
        if missing is not None:
            missing = np.asarray(missing, dtype=bool).ravel().reshape(dims)
        return cls(data.reshape(dims), missing=missing)

    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(tuple(int(n) for n in dims)))

    @property
    def dims(self):
        return tuple(self.values.shape)

    @property
    def order(self):
        return self.values.ndim

    @property
    def data(self):
        """Row-major linear view of the values."""
        return self.values.reshape(-1)

    def __repr__(self):
        return f"DenseTensor(dims={self.dims})"


class CpModel:
    """A CP (sum of rank-1 outer products) model.

    ``factors[k]`` has shape ``(n_k, r)``; column ``j`` holds the mode-k
    vector of the j-th rank-1 component.  ``r = 0`` represents the
    all-zeros tensor of the implied extents.
    """

    __slots__ = ("factors",)

    def __init__(self, factors):
        factors = tuple(_frozen(f) for f in factors)
        if len(factors) < 1:
            raise ModelError("a CP model needs at least one factor matrix")
        ranks = set()
        for k, f in enumerate(factors):
            if f.ndim != 2:
                raise ModelError(f"factor {k + 1} must be a matrix, got shape {f.shape}")
            if f.shape[0] < 1:
                raise ModelError(f"factor {k + 1} has no rows")
            ranks.add(f.shape[1])
        if len(ranks) != 1:
            raise ModelError("all factor matrices must share one column count, "
                             f"got {sorted(f.shape[1] for f in factors)}")
        object.__setattr__(self, "factors", factors)

    def __setattr__(self, name, value):
        raise AttributeError("CpModel is immutable")

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    @property
    def rank(self):
        return int(self.factors[0].shape[1])

    @property
    def dims(self):
        return tuple(int(f.shape[0]) for f in self.factors)

    @property
    def order(self):
        return len(self.factors)

    def __repr__(self):
        return f"CpModel(dims={self.dims}, rank={self.rank})"


def _check_same_dims(a, b):
    if a.dims != b.dims:
        raise ShapeError(f"tensor extents differ: {a.dims} vs {b.dims}")


def inner_product(x, y):
    """Sum over all indices of the elementwise product of two same-shape tensors."""
    _check_same_dims(x, y)
    return _seq_sum(x.values * y.values)


def generalized_inner_product(tensors):
    """Sum over all indices of the n-way elementwise product.

    Reduces to ``inner_product`` for two tensors and to the plain entry sum
    for one.
    """
    tensors = list(tensors)
    if not tensors:
        raise ValueError("generalized inner product needs at least one tensor")
    first = tensors[0]
    prod = first.values.copy()
    for t in tensors[1:]:
        _check_same_dims(first, t)
        prod *= t.values
    return _seq_sum(prod)


def frobenius_norm(x):
    """sqrt of the inner product of a tensor with itself."""
    return float(np.sqrt(inner_product(x, x)))


def _check_index(idx, dims):
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(dims):
        raise ValueError(f"index arity {len(idx)} does not match tensor order {len(dims)}")
    for i, n in zip(idx, dims):
        if not 1 <= i <= n:
            raise IndexError(f"index {idx} out of bounds for extents {dims}")
    return idx


def cp_evaluate_entry(m, idx):
    """Entry of the CP model at a 1-based multi-index.

    Computes ``sum_j prod_k U_k(i_k, j)`` with the product taken in mode
    order and the sum sequentially over components, matching
    ``cp_reconstruct`` bit-for-bit.
    """
    idx = _check_index(idx, m.dims)
    total = 0.0
    factors = m.factors
    for j in range(m.rank):
        p = float(factors[0][idx[0] - 1, j])
        for k in range(1, len(factors)):
            p *= float(factors[k][idx[k] - 1, j])
        total += p
    return total


def cp_reconstruct(m):
    """Dense tensor with every entry equal to ``cp_evaluate_entry``.

    Components accumulate sequentially (j ascending); within a component
    the outer product multiplies in mode order, so the per-entry floating
    point operations equal those of ``cp_evaluate_entry`` exactly.
    """
    dims = m.dims
    out = np.zeros(dims)
    for j in range(m.rank):
        piece = m.factors[0][:, j]
        for k in range(1, len(m.factors)):
            piece = piece[..., None] * m.factors[k][:, j]
        out += piece
    return DenseTensor(out)


def relative_error(pred, truth):
    """Frobenius norm of (pred - truth) divided by the Frobenius norm of truth."""
    _check_same_dims(pred, truth)
    denom = frobenius_norm(truth)
    if denom == 0.0:
        raise DomainError("relative error is undefined for a zero-norm reference")
    diff = DenseTensor(pred.values - truth.values)
    return frobenius_norm(diff) / denom
