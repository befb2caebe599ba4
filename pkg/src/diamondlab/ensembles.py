"""The two random-isometry ensembles and the balanced reference channel.

Equal case (d_A = r d_B): ``V_x = U_x (1 + O) U_x^dag`` with O diagonal and
``(1 + O)`` unitary; the output space E (x) B is identified with A.

Tilted case (d_A <= r d_B / 2): ``V_x = sqrt(1 - eps^2) |0>_F (x) V0 +
eps |1>_F (x) U_x S`` where V0 dilates a reference channel with nearly
orthogonal, balanced Kraus operators and S embeds A into E (x) B. The flag
qubit F belongs to the channel output, so the stored isometry has output
factors ordered (E, F, B) and the channel output is F (x) B.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import (
    Isometry,
    KrausSet,
    choi_rank,
    choi_state,
    choi_trace_distance,
    isometry_distance,
    kraus_to_stinespring,
)
from .haar import SeededRng, derive_substream, haar_unitary
from .matrix_core import ContractError, DimensionError, operator_norm, permute_subsystems

UNITARY_TOL = 1e-10
CLOSENESS_SLACK = 1e-12  # rounding on the exact 2 eps closeness


class Case(str, enum.Enum):
    EQUAL = "equal"
    TILTED = "tilted"


class RegimeError(ValueError):
    """Parameters fall outside the regime a construction is defined for."""


@dataclass(frozen=True)
class EnsembleParams:
    d_A: int
    d_B: int
    r: int
    eps: float
    M: int = 1
    seed: int = 0
    case: Case = Case.EQUAL

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        if min(self.d_A, self.d_B, self.r, self.M) < 1:
            raise RegimeError("dimensions, rank and M must be positive")
        if not 0.0 < self.eps < 1.0:
            raise RegimeError(f"eps={self.eps} outside (0, 1)")
        if self.case is Case.EQUAL and self.d_A != self.r * self.d_B:
            raise RegimeError(f"equal case needs d_A = r d_B, got {self.d_A} != {self.r}*{self.d_B}")
        if self.case is Case.TILTED and 2 * self.d_A > self.r * self.d_B:
            raise RegimeError(f"tilted case needs d_A <= r d_B / 2, got d_A={self.d_A}")

    @property
    def unitary_dim(self) -> int:
        return self.r * self.d_B

    @property
    def output_dim(self) -> int:
        """Dimension of the channel output (B, or F (x) B in the tilted case)."""
        return self.d_B if self.case is Case.EQUAL else 2 * self.d_B


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    params: EnsembleParams
    isometries: tuple
    unitaries: tuple
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.isometries)


# -- equal case --------------------------------------------------------------

def _check_eps(eps: float):
    if not 0.0 < eps < 1.0:
        raise RegimeError(f"eps={eps} outside (0, 1)")


def angle_for(eps: float) -> float:
    """theta in (pi/2, pi] with eps = -2 cos(theta)."""
    _check_eps(eps)
    return math.acos(-eps / 2)


def build_O(d_A: int, eps: float) -> np.ndarray:
    theta = angle_for(eps)
    if d_A < 1:
        raise DimensionError("d_A must be >= 1")
    diag = np.array([eps * np.exp(1j * theta * (1 if k % 2 == 0 else -1)) for k in range(d_A)])
    if d_A % 2:
        diag[-1] = 0.0
    return np.diag(diag)


def build_O_bar(d_A: int, eps: float) -> np.ndarray:
    """Traceless part of O."""
    o = build_O(d_A, eps)
    return o - np.trace(o) / d_A * np.eye(d_A)


def _require_unitary(u: np.ndarray, d: int):
    if u.shape != (d, d):
        raise DimensionError(f"unitary shape {u.shape} != ({d}, {d})")
    if operator_norm(u.conj().T @ u - np.eye(d)) > UNITARY_TOL:
        raise ContractError("matrix is not unitary")


def equal_case_matrix(u: np.ndarray, o: np.ndarray) -> np.ndarray:
    return u @ (np.eye(o.shape[0]) + o) @ u.conj().T


def build_isometry_equal_case(u: np.ndarray, o: np.ndarray, d_B: int | None = None) -> Isometry:
    d_A = o.shape[0]
    _require_unitary(u, d_A)
    d_B = d_B or 1
    if d_A % d_B:
        raise DimensionError(f"d_B={d_B} does not divide d_A={d_A}")
    return Isometry(equal_case_matrix(u, o), d_A, d_B, d_A // d_B)


# -- reference channel with balanced Kraus operators --------------------------

def generalized_paulis(d: int) -> list[np.ndarray]:
    """The d^2 clock-and-shift unitaries X^a Z^b, ordered by (a, b)."""
    if d < 1:
        raise DimensionError("d must be >= 1")
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    out = []
    for a in range(d):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(d):
            out.append(xa @ np.linalg.matrix_power(clock, b))
    return out


def _block_isometries(d_in: int, d_out: int, count: int) -> list[np.ndarray]:
    """``count`` trace-orthogonal isometries C^d_in -> C^d_out.

    Each is a generalized Pauli placed in one of the floor(d_out / d_in)
    disjoint d_in-blocks of the output, so Tr[V_i^dag V_j] = d_in delta_ij.
    """
    blocks = d_out // d_in
    paulis = generalized_paulis(d_in)
    if count > blocks * len(paulis):
        raise RegimeError(f"only {blocks * len(paulis)} orthogonal isometries available, need {count}")
    out = []
    for idx in range(count):
        blk, j = divmod(idx, len(paulis))
        v = np.zeros((d_out, d_in), complex)
        v[blk * d_in:(blk + 1) * d_in, :] = paulis[j]
        out.append(v)
    return out


def build_reference_kraus(d_A: int, d_B: int, r: int) -> KrausSet:
    """Kraus operators K_i (d_B x d_A) with sum K^dag K = 1 and
    |Tr[K_i^dag K_j]| <= (2 d_A / r) delta_ij, using at most r operators."""
    if min(d_A, d_B, r) < 1:
        raise RegimeError("dimensions and rank must be positive")
    if 2 * d_A > r * d_B:
        raise RegimeError(f"need d_A <= r d_B / 2, got d_A={d_A}, r={r}, d_B={d_B}")
    if d_A <= d_B:
        n = math.ceil(r / 2)
        ops = [v / math.sqrt(n) for v in _block_isometries(d_A, d_B, n)]
    else:
        k = d_A // d_B
        d_C = d_A - k * d_B
        l = math.ceil(r / (2 * k))
        if l > d_B * d_B:
            raise RegimeError(f"need {l} orthogonal unitaries on C^{d_B}, only {d_B * d_B} exist")
        paulis = generalized_paulis(d_B)
        ops = []
        for i in range(k):
            for j in range(l):
                kop = np.zeros((d_B, d_A), complex)
                kop[:, i * d_B:(i + 1) * d_B] = paulis[j] / math.sqrt(l)
                ops.append(kop)
        if d_C:
            r_c = math.ceil(r * d_C / (2 * d_A))
            for v in _block_isometries(d_C, d_B, r_c):
                kop = np.zeros((d_B, d_A), complex)
                kop[:, k * d_B:] = v / math.sqrt(r_c)
                ops.append(kop)
    if len(ops) > r:
        raise RegimeError(f"construction produced {len(ops)} > r={r} Kraus operators")
    return KrausSet(tuple(ops), d_A, d_B)


def build_embedding_S(d_A: int, d_B: int, r: int) -> np.ndarray:
    if d_A > r * d_B:
        raise DimensionError(f"cannot embed C^{d_A} into C^{r * d_B}")
    return np.eye(r * d_B, d_A, dtype=complex)


# -- tilted case ---------------------------------------------------------------

def tilted_matrix(u: np.ndarray, v0: np.ndarray, s: np.ndarray, eps: float, r: int, d_B: int) -> np.ndarray:
    """Unchecked tilted isometry with output factors reordered to (E, F, B)."""
    top = math.sqrt(1 - eps * eps) * v0
    bottom = eps * (u @ s)
    fbe = np.vstack([top, bottom])  # factors (F, E, B)
    return permute_subsystems(fbe, (1, 0, 2), (2, r, d_B))


def build_isometry_tilted(u: np.ndarray, v0: Isometry, s: np.ndarray, eps: float) -> Isometry:
    if not 0.0 <= eps < 1.0:
        raise RegimeError(f"eps={eps} outside [0, 1)")
    d = v0.d_E * v0.d_B
    _require_unitary(u, d)
    if s.shape != (d, v0.d_A):
        raise DimensionError(f"embedding shape {s.shape} != ({d}, {v0.d_A})")
    m = tilted_matrix(u, v0.matrix, s, eps, v0.d_E, v0.d_B)
    return Isometry(m, v0.d_A, 2 * v0.d_B, v0.d_E)


def reference_isometry(params: EnsembleParams) -> Isometry:
    return kraus_to_stinespring(build_reference_kraus(params.d_A, params.d_B, params.r), d_E=params.r)


class IsometryFactory:
    """Maps a unitary on E (x) B to the ensemble member it generates."""

    def __init__(self, params: EnsembleParams):
        self.params = params
        p = params
        if p.case is Case.EQUAL:
            self.O = build_O(p.d_A, p.eps)
            self.O_bar = build_O_bar(p.d_A, p.eps)
        else:
            self.v0 = reference_isometry(p)
            self.S = build_embedding_S(p.d_A, p.d_B, p.r)

    def matrix(self, u: np.ndarray) -> np.ndarray:
        p = self.params
        if p.case is Case.EQUAL:
            return equal_case_matrix(u, self.O)
        return tilted_matrix(u, self.v0.matrix, self.S, p.eps, p.r, p.d_B)

    def __call__(self, u: np.ndarray) -> Isometry:
        p = self.params
        return Isometry(self.matrix(u), p.d_A, p.output_dim, p.r)


def generate_ensemble(params: EnsembleParams) -> ChannelEnsemble:
    """Member x is built from the Haar unitary drawn on substream x."""
    root = SeededRng(params.seed)
    make = IsometryFactory(params)
    us, isos = [], []
    for x in range(params.M):
        u = haar_unitary(derive_substream(root, x).generator(), params.unitary_dim)
        us.append(u)
        isos.append(make(u))
    meta: dict = {"case": params.case.value}
    if params.case is Case.EQUAL:
        meta["theta"] = angle_for(params.eps)
    else:
        meta["reference_kraus"] = [k.copy() for k in build_reference_kraus(params.d_A, params.d_B, params.r).operators]
    return ChannelEnsemble(params, tuple(isos), tuple(us), meta)


# -- certification -------------------------------------------------------------

@dataclass
class PairRecord:
    i: int
    j: int
    choi_dist: float
    iso_dist: float
    separated: bool
    close: bool

    @property
    def verdict(self) -> str:
        return "PASS" if self.separated and self.close else "FAIL"


@dataclass
class CertificationReport:
    sep_threshold: float
    eta: float
    pairs: list
    min_separation: float
    max_closeness: float
    choi_ranks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.verdict == "PASS" for p in self.pairs)


def pairwise_choi_distances(isos: Sequence[Isometry]) -> list[tuple[int, int, float]]:
    return [
        (i, j, choi_trace_distance(isos[i], isos[j]))
        for i in range(len(isos))
        for j in range(i + 1, len(isos))
    ]


def certify_ensemble(ens: ChannelEnsemble | Sequence[Isometry], sep_threshold: float | None = None,
                     eta: float | None = None) -> CertificationReport:
    """Check every pair for Choi separation above ``sep_threshold`` and
    isometry closeness within ``eta``.

    Defaults: ``eta = 2 eps``; ``sep_threshold`` a quarter of the mean
    pairwise Choi distance of the ensemble itself.
    """
    isos = list(ens.isometries if isinstance(ens, ChannelEnsemble) else ens)
    if eta is None:
        if not isinstance(ens, ChannelEnsemble):
            raise ValueError("eta is required for a bare list of isometries")
        eta = 2 * ens.params.eps
    dists = pairwise_choi_distances(isos)
    if sep_threshold is None:
        sep_threshold = 0.25 * float(np.mean([d for *_, d in dists])) if dists else 0.0
    pairs = []
    for i, j, cd in dists:
        idist = isometry_distance(isos[i], isos[j])
        pairs.append(PairRecord(i, j, cd, idist, cd > sep_threshold, idist <= eta + CLOSENESS_SLACK))
    return CertificationReport(
        sep_threshold=sep_threshold,
        eta=eta,
        pairs=pairs,
        min_separation=min((p.choi_dist for p in pairs), default=math.inf),
        max_closeness=max((p.iso_dist for p in pairs), default=0.0),
        choi_ranks=[choi_rank(choi_state(v).matrix) for v in isos],
    )
