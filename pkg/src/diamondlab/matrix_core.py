"""Dense complex linear algebra on operators with subsystem structure.

Subsystem convention: for a composite space H_1 (x) H_2 (x) ... the leftmost
factor is the slowest-varying index (numpy's row-major ``kron`` ordering).
Every module in the package relies on this.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-10


class DimensionError(ValueError):
    """Raised when operator shapes or subsystem dimensions do not match."""


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def _dims_tuple(dims, size: int) -> tuple[int, ...]:
    if dims is None:
        return (size,)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or math.prod(dims) != size:
        raise DimensionError(f"dims {dims} do not multiply to {size}")
    return dims


@dataclass(frozen=True, eq=False)
class Operator:
    """A dense complex matrix that remembers how its rows and columns factor."""

    entries: np.ndarray
    row_dims: tuple[int, ...] = field(default=None)
    col_dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2:
            raise DimensionError(f"operator must be 2-d, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractError("operator entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "row_dims", _dims_tuple(self.row_dims, a.shape[0]))
        object.__setattr__(self, "col_dims", _dims_tuple(self.col_dims, a.shape[1]))

    @classmethod
    def square(cls, entries, dims=None) -> "Operator":
        return cls(entries, dims, dims)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.col_dims, self.row_dims)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        return (
            isinstance(other, Operator)
            and self.row_dims == other.row_dims
            and self.col_dims == other.col_dims
            and np.array_equal(self.entries, other.entries)
        )


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns, unitary


def _arr(x) -> np.ndarray:
    return x.entries if isinstance(x, Operator) else np.asarray(x)


def tensor(*ops) -> Operator:
    """Kronecker product; subsystem dimension lists concatenate."""
    if not ops:
        raise DimensionError("tensor of nothing")
    out = None
    rdims: list[int] = []
    cdims: list[int] = []
    for op in ops:
        a = _arr(op)
        if a.ndim != 2:
            raise DimensionError("tensor factors must be matrices")
        if isinstance(op, Operator):
            rdims += op.row_dims
            cdims += op.col_dims
        else:
            rdims.append(a.shape[0])
            cdims.append(a.shape[1])
        out = a if out is None else np.kron(out, a)
    return Operator(out, rdims, cdims)


def partial_trace(x, keep: Sequence[int], dims: Sequence[int] | None = None):
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` is taken from the operator when ``x`` is an :class:`Operator`.
    The kept subsystems stay in their original order. Returns the same kind
    of object that was passed in.
    """
    a = _arr(x)
    if dims is None:
        if not isinstance(x, Operator):
            raise DimensionError("dims required for a bare array")
        if x.row_dims != x.col_dims:
            raise DimensionError("partial trace needs row_dims == col_dims")
        dims = x.row_dims
    dims = tuple(int(d) for d in dims)
    if a.shape[0] != a.shape[1] or math.prod(dims) != a.shape[0]:
        raise DimensionError(f"dims {dims} incompatible with shape {a.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"subsystem index out of range in keep={keep}")
    n = len(dims)
    t = a.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise DimensionError("too many subsystems")
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out_idx, t)
    kd = tuple(dims[i] for i in keep)
    size = math.prod(kd)
    res = np.asarray(res).reshape(size, size)
    if isinstance(x, Operator):
        return Operator.square(res, kd if kd else (1,))
    return res


def permute_subsystems(x, perm: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of the row space of ``x``.

    ``x`` may be a column block (rows factor as ``dims``, columns arbitrary).
    Output factor ``j`` is input factor ``perm[j]``.
    """
    a = _arr(x)
    dims = tuple(dims)
    t = a.reshape(dims + (a.shape[1],))
    return t.transpose(tuple(perm) + (len(dims),)).reshape(a.shape)


def singular_values(x) -> np.ndarray:
    return np.linalg.svd(_arr(x), compute_uv=False)


def trace_norm(x) -> float:
    return float(np.sum(singular_values(x)))


def operator_norm(x) -> float:
    a = _arr(x)
    if a.size == 0:
        return 0.0
    return float(singular_values(a)[0])


def frobenius_norm(x) -> float:
    return float(np.linalg.norm(_arr(x)))


def pair_two_norm(a, b) -> float:
    """Norm of the pair (A, B) in the l2-sum of Hilbert-Schmidt norms."""
    return math.sqrt(frobenius_norm(a) ** 2 + frobenius_norm(b) ** 2)


def hermiticity_defect(x) -> float:
    a = _arr(x)
    return operator_norm(a - a.conj().T)


def hermitian_eig(x) -> SpectralDecomposition:
    a = _arr(x)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("hermitian_eig needs a square matrix")
    scale = operator_norm(a)
    if hermiticity_defect(a) > HERMITIAN_RTOL * max(scale, 1e-300):
        raise ContractError("matrix is not Hermitian within tolerance")
    w, q = np.linalg.eigh((a + a.conj().T) / 2)
    return SpectralDecomposition(w[::-1].copy(), q[:, ::-1].copy())


# -- portable matrix files -------------------------------------------------

def _fmt(v: float) -> str:
    s = format(float(v), ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps_operator(op) -> str:
    """Serialize to the portable JSON matrix document (17 significant digits)."""
    if not isinstance(op, Operator):
        op = Operator(op)
    a = op.entries
    pairs = ", ".join(f"[{_fmt(z.real)}, {_fmt(z.imag)}]" for z in a.ravel())
    return (
        "{\n"
        f'  "rows": {a.shape[0]},\n'
        f'  "cols": {a.shape[1]},\n'
        f'  "row_dims": {json.dumps(list(op.row_dims))},\n'
        f'  "col_dims": {json.dumps(list(op.col_dims))},\n'
        f'  "data": [{pairs}]\n'
        "}\n"
    )


def loads_operator(text: str) -> Operator:
    doc = json.loads(text)
    rows, cols = int(doc["rows"]), int(doc["cols"])
    data = np.array(doc["data"], dtype=float).reshape(-1, 2)
    if data.shape[0] != rows * cols:
        raise DimensionError(f"data has {data.shape[0]} entries, expected {rows * cols}")
    entries = (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)
    return Operator(entries, doc.get("row_dims"), doc.get("col_dims"))
