"""Kraus, Stinespring and Choi representations of channels.

Stinespring isometries map A -> E (x) B with the environment as the
*leftmost* output factor, so ``V = sum_i |i>_E (x) K_i`` and the Kraus
operator ``K_i`` is the i-th block of ``d_B`` rows of ``V``. Choi states live
on A' (x) B with the reference copy A' first.

The diamond distance is never computed. Consumers use the certified sandwich
``choi_trace_distance <= diamond <= 2 * isometry_distance``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matrix_core import (
    ContractError,
    DimensionError,
    Operator,
    hermitian_eig,
    operator_norm,
    trace_norm,
)

ISOMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Isometry:
    matrix: np.ndarray
    d_A: int
    d_B: int
    d_E: int

    def __post_init__(self):
        v = np.array(self.matrix, dtype=complex)
        if v.shape != (self.d_E * self.d_B, self.d_A):
            raise DimensionError(
                f"isometry shape {v.shape} != ({self.d_E}*{self.d_B}, {self.d_A})"
            )
        v.setflags(write=False)
        object.__setattr__(self, "matrix", v)
        res = isometry_residual(v)
        if res > ISOMETRY_TOL:
            raise ContractError(f"V^dag V deviates from identity by {res:.3e}")

    @property
    def operator(self) -> Operator:
        return Operator(self.matrix, (self.d_E, self.d_B), (self.d_A,))


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: tuple
    d_A: int
    d_B: int

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        if not ops:
            raise DimensionError("empty Kraus set")
        for k in ops:
            if k.shape != (self.d_B, self.d_A):
                raise DimensionError(f"Kraus operator shape {k.shape} != ({self.d_B}, {self.d_A})")
        object.__setattr__(self, "operators", ops)

    def __len__(self):
        return len(self.operators)

    def completeness_residual(self) -> float:
        s = sum(k.conj().T @ k for k in self.operators)
        return operator_norm(s - np.eye(self.d_A))

    @classmethod
    def from_list(cls, ops: Sequence[np.ndarray]) -> "KrausSet":
        d_B, d_A = np.shape(ops[0])
        return cls(tuple(ops), d_A, d_B)


@dataclass(frozen=True, eq=False)
class ChoiState:
    matrix: np.ndarray
    d_A: int
    d_B: int

    def __post_init__(self):
        j = np.asarray(self.matrix, dtype=complex)
        n = self.d_A * self.d_B
        if j.shape != (n, n):
            raise DimensionError(f"Choi matrix shape {j.shape} != ({n}, {n})")
        w = hermitian_eig(j).eigenvalues
        if w[-1] < -1e-10:
            raise ContractError(f"Choi matrix not PSD (min eigenvalue {w[-1]:.3e})")
        if abs(np.trace(j) - 1) > 1e-10:
            raise ContractError("Choi matrix does not have unit trace")
        marg = np.einsum("abcb->ac", j.reshape(self.d_A, self.d_B, self.d_A, self.d_B))
        if operator_norm(marg - np.eye(self.d_A) / self.d_A) > 1e-9:
            raise ContractError("Choi marginal on A' is not maximally mixed")
        object.__setattr__(self, "matrix", j)


def isometry_residual(v) -> float:
    v = np.asarray(v)
    return operator_norm(v.conj().T @ v - np.eye(v.shape[1]))


def _check_pair(v1: Isometry, v2: Isometry, same_env: bool = False):
    if (v1.d_A, v1.d_B) != (v2.d_A, v2.d_B):
        raise DimensionError("channels act between different spaces")
    if same_env and v1.d_E != v2.d_E:
        raise DimensionError("isometries have different environment sizes")


def stinespring_to_kraus(v: Isometry) -> KrausSet:
    m = v.matrix.reshape(v.d_E, v.d_B, v.d_A)
    return KrausSet(tuple(m[i] for i in range(v.d_E)), v.d_A, v.d_B)


def kraus_to_stinespring(kraus: KrausSet | Sequence[np.ndarray], d_E: int | None = None) -> Isometry:
    """Stack Kraus operators into ``sum_i |i>_E (x) K_i``.

    ``d_E`` may exceed the number of operators; the extra environment levels
    get zero blocks.
    """
    if not isinstance(kraus, KrausSet):
        kraus = KrausSet.from_list(list(kraus))
    res = kraus.completeness_residual()
    if res > ISOMETRY_TOL:
        raise ContractError(f"Kraus set incomplete (residual {res:.3e})")
    n = len(kraus)
    d_E = n if d_E is None else d_E
    if d_E < n:
        raise DimensionError(f"environment of size {d_E} cannot hold {n} Kraus operators")
    blocks = list(kraus.operators) + [np.zeros((kraus.d_B, kraus.d_A), complex)] * (d_E - n)
    return Isometry(np.vstack(blocks), kraus.d_A, kraus.d_B, d_E)


def apply_channel(v: Isometry, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (v.d_A, v.d_A):
        raise DimensionError(f"input state shape {rho.shape} != ({v.d_A}, {v.d_A})")
    out = (v.matrix @ rho @ v.matrix.conj().T).reshape(v.d_E, v.d_B, v.d_E, v.d_B)
    return np.einsum("ebed->bd", out)


def choi_matrix(v: np.ndarray, d_A: int, d_B: int, d_E: int) -> np.ndarray:
    """Unchecked Choi matrix of ``X -> Tr_E[V X V^dag]`` on A' (x) B."""
    m = (np.asarray(v).T / np.sqrt(d_A)).reshape(d_A, d_E, d_B)
    return np.einsum("aeb,ced->abcd", m, m.conj()).reshape(d_A * d_B, d_A * d_B)


def choi_state(v: Isometry) -> ChoiState:
    return ChoiState(choi_matrix(v.matrix, v.d_A, v.d_B, v.d_E), v.d_A, v.d_B)


def choi_from_kraus(kraus: KrausSet) -> np.ndarray:
    d_A, d_B = kraus.d_A, kraus.d_B
    j = np.zeros((d_A * d_B, d_A * d_B), complex)
    for k in kraus.operators:
        # (I (x) K)|Psi> reshaped as an A' x B matrix is K^T / sqrt(d_A)
        w = (k.T / np.sqrt(d_A)).ravel()
        j += np.outer(w, w.conj())
    return j


def choi_rank(j, tol: float | None = None) -> int:
    """Number of Choi eigenvalues above ``tol`` (default 1e-8 * largest)."""
    m = j.matrix if isinstance(j, ChoiState) else np.asarray(j)
    w = hermitian_eig(m).eigenvalues
    if tol is None:
        tol = 1e-8 * max(w[0], 0.0)
    if tol <= 0 and w[0] <= 0:
        return 0
    return int(np.sum(w > tol))


def choi_trace_distance(v1: Isometry, v2: Isometry) -> float:
    _check_pair(v1, v2)
    j1 = choi_matrix(v1.matrix, v1.d_A, v1.d_B, v1.d_E)
    j2 = choi_matrix(v2.matrix, v2.d_A, v2.d_B, v2.d_E)
    return trace_norm(j1 - j2)


def isometry_distance(v1: Isometry, v2: Isometry) -> float:
    _check_pair(v1, v2, same_env=True)
    return operator_norm(v1.matrix - v2.matrix)


def mix_channels(k_a: KrausSet, k_b: KrausSet, p: float) -> KrausSet:
    """Kraus set of the convex mixture ``(1 - p) Phi_a + p Phi_b``."""
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"mixing weight {p} outside [0, 1]")
    if (k_a.d_A, k_a.d_B) != (k_b.d_A, k_b.d_B):
        raise DimensionError("cannot mix channels between different spaces")
    ops = [np.sqrt(1 - p) * k for k in k_a.operators] + [np.sqrt(p) * k for k in k_b.operators]
    return KrausSet(tuple(ops), k_a.d_A, k_a.d_B)
