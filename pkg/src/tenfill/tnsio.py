"""Sparse-tensor text files.

Grammar (whitespace-separated, 1-based indices):

    line 1: order d
    line 2: extents n_1 ... n_d
    lines 3..: one entry per line, "i_1 ... i_d value"

Values serialize as the shortest decimal that round-trips the exact
float64, so write-then-read reproduces data bitwise.  Dense tensors list
every cell in row-major index order.
"""

import numpy as np

from .core import DenseTensor
from .errors import TnsBoundsError, TnsDataError, TnsFormatError
from .synth import ObservationSet

__all__ = ["load_tns", "write_tns"]


def _parse_ints(parts, lineno, what):
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise TnsFormatError(f"line {lineno}: {what}: {exc}", line=lineno) from None


def load_tns(path, as_dense=False):
    """Read a .tns file into an ObservationSet (or a DenseTensor).

    ``as_dense=True`` requires every cell to be present and materializes
    the full tensor.  Malformed lines, duplicate indices, and
    out-of-bounds indices raise errors naming the 1-based line.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise TnsFormatError("file must declare an order line and an extent line", line=1)
    head = lines[0].split()
    if len(head) != 1:
        raise TnsFormatError(f"line 1: order must be one integer, got {lines[0]!r}", line=1)
    (order,) = _parse_ints(head, 1, "order must be one integer")
    if order < 1:
        raise TnsFormatError(f"line 1: order must be >= 1, got {order}", line=1)
    extents = _parse_ints(lines[1].split(), 2, "bad extent")
    if len(extents) != order or any(n < 1 for n in extents):
        raise TnsFormatError(f"line 2: expected {order} positive extents, "
                             f"got {lines[1]!r}", line=2)
    dims = tuple(extents)
    indices = []
    values = []
    seen = {}
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != order + 1:
            raise TnsFormatError(f"line {lineno}: expected {order} indices and a value, "
                                 f"got {len(parts)} fields", line=lineno)
        idx = tuple(_parse_ints(parts[:-1], lineno, "bad index"))
        try:
            value = float(parts[-1])
        except ValueError:
            raise TnsFormatError(f"line {lineno}: bad value {parts[-1]!r}",
                                 line=lineno) from None
        if not np.isfinite(value):
            raise TnsFormatError(f"line {lineno}: value must be finite", line=lineno)
        for i, n in zip(idx, dims):
            if not 1 <= i <= n:
                raise TnsBoundsError(f"line {lineno}: index {idx} outside extents {dims}",
                                     line=lineno)
        if idx in seen:
            raise TnsDataError(f"line {lineno}: duplicate index {idx} "
                               f"(first on line {seen[idx]})", line=lineno)
        seen[idx] = lineno
        indices.append(idx)
        values.append(value)
    if not indices:
        raise TnsDataError("file carries no entries", line=len(lines))
    obs = ObservationSet(dims, np.asarray(indices, dtype=np.int64), np.asarray(values))
    if not as_dense:
        return obs
    total = int(np.prod(dims))
    if len(obs) != total:
        raise TnsDataError(f"cannot materialize a dense tensor: {len(obs)} of "
                           f"{total} cells present")
    dense = np.zeros(dims)
    dense[tuple((obs.indices - 1).T)] = obs.values
    return DenseTensor(dense)


def _format_value(v):
    return repr(float(v))


def write_tns(path, tensor_or_obs):
    """Write a DenseTensor (all cells, row-major) or an ObservationSet."""
    if isinstance(tensor_or_obs, DenseTensor):
        dims = tensor_or_obs.dims
        flat = tensor_or_obs.data
        grids = np.indices(dims).reshape(len(dims), -1) + 1
        rows = grids.T
        values = flat
    else:
        obs = tensor_or_obs
        dims = obs.dims
        rows = obs.indices
        values = obs.values
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{len(dims)}\n")
        fh.write(" ".join(str(n) for n in dims) + "\n")
        for row, v in zip(rows, values):
            fh.write(" ".join(str(int(i)) for i in row) + " " + _format_value(v) + "\n")
