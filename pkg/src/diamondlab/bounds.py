"""Entropy utilities, query-complexity lower-bound calculators and a small
coherent-protocol simulator.

All logarithms are natural. The calculators are pure functions of their
inputs; N is always floored at 1 since a bound below one query says nothing.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .channels import Isometry, isometry_distance
from .ensembles import ChannelEnsemble
from .haar import SeededRng, derive_substream, haar_unitary, random_pure_state
from .matrix_core import ContractError, DimensionError, hermitian_eig, partial_trace, trace_norm

STATE_TOL = 1e-9


# -- entropies -------------------------------------------------------------------

def binary_entropy(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"binary_entropy needs a in [0, 1], got {a}")
    if a in (0.0, 1.0):
        return 0.0
    return -a * math.log(a) - (1 - a) * math.log(1 - a)


def _check_state(rho: np.ndarray):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"state must be square, got {rho.shape}")
    if abs(np.trace(rho) - 1) > STATE_TOL:
        raise ContractError(f"state trace {np.trace(rho).real:.6g} != 1")
    w = hermitian_eig(rho).eigenvalues
    if w[-1] < -STATE_TOL:
        raise ContractError(f"state has negative eigenvalue {w[-1]:.3e}")
    return w


def von_neumann_entropy(rho) -> float:
    w = _check_state(np.asarray(rho))
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def _marginal(rho, dims, keep):
    return partial_trace(np.asarray(rho), keep, dims)


def conditional_entropy(rho_ab, dims: Sequence[int]) -> float:
    """S(A|B) = S(AB) - S(B) for a state on A (x) B."""
    d_a, d_b = dims
    if np.shape(rho_ab) != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"state shape {np.shape(rho_ab)} does not match dims {tuple(dims)}")
    return von_neumann_entropy(rho_ab) - von_neumann_entropy(_marginal(rho_ab, dims, [1]))


def mutual_information(rho_ab, dims: Sequence[int]) -> float:
    return (von_neumann_entropy(_marginal(rho_ab, dims, [0])) + von_neumann_entropy(_marginal(rho_ab, dims, [1]))
            - von_neumann_entropy(rho_ab))


def continuity_bound_rhs(t: float, dim: int) -> float:
    """t log(dim^2) + h2(t)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"continuity bound needs t in [0, 1], got {t}")
    return t * math.log(dim * dim) + binary_entropy(t)


@dataclass
class ContinuityCheck:
    lhs: float
    rhs: float
    distance: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 1e-12

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def check_continuity_bound(rho, sigma, dims: Sequence[int]) -> ContinuityCheck:
    """|S(A|B)_rho - S(A|B)_sigma| against t log(d_A^2) + h2(t), t = ||rho - sigma||_1.

    For t > 1 the h2 term is dropped: t log(d_A^2) >= 2 log d_A already
    dominates any difference of conditional entropies.
    """
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if trace_norm(_marginal(rho, dims, [1]) - _marginal(sigma, dims, [1])) > 1e-9:
        raise ContractError("continuity bound needs equal marginals on the conditioning system")
    t = trace_norm(rho - sigma)
    lhs = abs(conditional_entropy(rho, dims) - conditional_entropy(sigma, dims))
    rhs = continuity_bound_rhs(t, dims[0]) if t <= 1 else t * math.log(dims[0] ** 2)
    return ContinuityCheck(lhs, rhs, t)


# -- calculators --------------------------------------------------------------------

def fano_rhs_log(log_m: float) -> float:
    if log_m < math.log(3):
        raise ValueError("Fano bound needs M >= 3")
    return (2 / 3) * log_m - math.log(2)


def fano_rhs(M: int) -> float:
    """(2/3) log M - log 2."""
    if M < 3:
        raise ValueError(f"Fano bound needs M >= 3, got {M}")
    return fano_rhs_log(math.log(M))


def _ceil_at_least_one(x: float) -> int:
    return max(1, math.ceil(x))


def general_lower_bound(M: int | None, eta: float, dB_r: int, log_M: float | None = None,
                        check_eta: bool = True) -> int:
    """ceil(((2/3) log M - log 2) / (4 eta log(d_B r / eta))).

    Pass ``log_M`` instead of ``M`` when M itself overflows.
    """
    if check_eta and not 0 < eta < 0.5:
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if dB_r < 1:
        raise ValueError("d_B r must be >= 1")
    num = fano_rhs_log(log_M) if log_M is not None else fano_rhs(M)
    return _ceil_at_least_one(num / (4 * eta * math.log(dB_r / eta)))


def tilted_lower_bound(log_M: float, eps: float, dB_r: int) -> int:
    """ceil(((2/3) log M - log 2) / (16 eps^2 log(d_B r / eps)))."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return _ceil_at_least_one(fano_rhs_log(log_M) / (16 * eps * eps * math.log(dB_r / eps)))


@dataclass
class BoundReport:
    inputs: dict
    N_general: int | None = None
    N_main_equal: int | None = None
    N_main_tilted: int | None = None
    N_packing: int | None = None
    provenance: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("N_general", "N_main_equal", "N_main_tilted", "N_packing"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ContractError(f"{name} = {v} < 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def merge(self, other: "BoundReport") -> "BoundReport":
        out = BoundReport({**self.inputs, **other.inputs}, provenance={**self.provenance, **other.provenance},
                          flags=self.flags + [f for f in other.flags if f not in self.flags])
        for name in ("N_general", "N_main_equal", "N_main_tilted", "N_packing"):
            setattr(out, name, getattr(other, name) if getattr(other, name) is not None else getattr(self, name))
        return out


def _regime_flags(d_A, d_B, r, eps) -> list[str]:
    flags = []
    if not 0 < eps < 1e-4:
        flags.append(f"eps={eps} outside the asymptotic regime (0, 1e-4)")
    if d_A * d_B * r < 2500:
        flags.append(f"d_A d_B r = {d_A * d_B * r} below the asymptotic regime (>= 2500)")
    return flags


def main_lower_bound(d_A: int, d_B: int, r: int, eps: float, c_ensemble: float = 1.0,
                     case: str = "equal", log_M: float | None = None) -> BoundReport:
    """Query lower bound for the equal (d_A = r d_B) or tilted (d_A <= r d_B / 2) family.

    log M defaults to ``c_ensemble * d_A * d_B * r``.
    """
    case = getattr(case, "value", case)
    if case == "equal" and d_A != r * d_B:
        raise ValueError(f"equal case needs d_A = r d_B, got {d_A} vs {r * d_B}")
    if case == "tilted" and 2 * d_A > r * d_B:
        raise ValueError(f"tilted case needs d_A <= r d_B / 2, got d_A={d_A}")
    if case not in ("equal", "tilted"):
        raise ValueError(f"unknown case {case!r}")
    lm = c_ensemble * d_A * d_B * r if log_M is None else log_M
    inputs = dict(d_A=d_A, d_B=d_B, r=r, eps=eps, log_M=lm, c_ensemble=c_ensemble, case=case)
    rep = BoundReport(inputs, flags=_regime_flags(d_A, d_B, r, eps))
    if case == "equal":
        rep.N_main_equal = general_lower_bound(None, 2 * eps, d_B * r, log_M=lm)
        rep.provenance["N_main_equal"] = (
            f"general bound with eta = 2 eps, log M = {lm:g}: "
            "ceil(((2/3) log M - log 2) / (4 eta log(d_B r / eta)))")
    else:
        rep.N_main_tilted = tilted_lower_bound(lm, eps, d_B * r)
        rep.provenance["N_main_tilted"] = (
            f"log M = {lm:g}: ceil(((2/3) log M - log 2) / (16 eps^2 log(d_B r / eps)))")
    return rep


def packing_net_bound(d_A: int, d_B: int, r: int, eps: float, c_pack: float = 1.0,
                      log_M: float | None = None) -> BoundReport:
    """General bound at eta = 4 sqrt(eps) with log M = c_pack r d_A d_B."""
    if not 0 < eps < 0.25:
        raise ValueError(f"packing bound needs eps in (0, 1/4), got {eps}")
    eta = 4 * math.sqrt(eps)
    lm = c_pack * r * d_A * d_B if log_M is None else log_M
    flags = []
    if eta >= 0.5:
        flags.append(f"eta = 4 sqrt(eps) = {eta:.4g} >= 1/2; general bound evaluated outside its hypothesis")
    rep = BoundReport(dict(d_A=d_A, d_B=d_B, r=r, eps=eps, log_M=lm, c_pack=c_pack, eta=eta), flags=flags)
    rep.N_packing = general_lower_bound(None, eta, d_B * r, log_M=lm, check_eta=False)
    rep.provenance["N_packing"] = f"general bound with eta = 4 sqrt(eps), log M = {lm:g}"
    return rep


def all_bounds(d_A: int, d_B: int, r: int, eps: float, c_ensemble: float = 1.0, c_pack: float = 1.0,
               log_M: float | None = None) -> BoundReport:
    """Every calculator that applies at these dimensions, merged into one report."""
    lm = c_ensemble * d_A * d_B * r if log_M is None else log_M
    rep = BoundReport(dict(d_A=d_A, d_B=d_B, r=r, eps=eps, log_M=lm))
    if 2 * eps < 0.5:
        rep.N_general = general_lower_bound(None, 2 * eps, d_B * r, log_M=lm)
        rep.provenance["N_general"] = "general bound with eta = 2 eps"
    if d_A == r * d_B:
        rep = rep.merge(main_lower_bound(d_A, d_B, r, eps, c_ensemble, "equal", log_M))
    if 2 * d_A <= r * d_B:
        rep = rep.merge(main_lower_bound(d_A, d_B, r, eps, c_ensemble, "tilted", log_M))
    if 0 < eps < 0.25:
        pk = c_pack * r * d_A * d_B if log_M is None else log_M
        rep = rep.merge(packing_net_bound(d_A, d_B, r, eps, c_pack, pk))
    return rep


# -- protocol simulator ----------------------------------------------------------------

class SimulationOverflow(DimensionError):
    pass


@dataclass
class ProtocolConfig:
    """Members are Stinespring isometries A -> E (x) B of one ensemble.
    Member 0 plays the distinguished channel of the reference mixture."""

    isometries: Sequence[Isometry]
    N_queries: int
    aux_dim: int = 2
    seed: int = 0
    max_dim: int = 1 << 20
    flag_register: bool = False

    def __post_init__(self):
        if isinstance(self.isometries, ChannelEnsemble):
            self.isometries = self.isometries.isometries
        self.isometries = list(self.isometries)
        if not self.isometries:
            raise ValueError("empty ensemble")
        if self.N_queries < 1 or self.aux_dim < 1:
            raise ValueError("N_queries and aux_dim must be >= 1")
        v0 = self.isometries[0]
        for v in self.isometries:
            if (v.d_A, v.d_B, v.d_E) != (v0.d_A, v0.d_B, v0.d_E):
                raise DimensionError("ensemble members have different shapes")


@dataclass
class ProtocolTrace:
    gaps: list
    eta: float
    f_diagonals: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gaps:
            if not -1e-12 <= g <= 2 + 1e-12:
                raise ContractError(f"trace distance {g} outside [0, 2]")

    @property
    def bound(self) -> float:
        return 2 * self.eta

    @property
    def passed(self) -> bool:
        return all(g <= self.bound + 1e-9 for g in self.gaps)


def max_pairwise_isometry_distance(isos: Sequence[Isometry]) -> float:
    return max((isometry_distance(a, b) for i, a in enumerate(isos) for b in isos[i + 1:]), default=0.0)


def mixture_gap(a: np.ndarray, b: np.ndarray) -> float:
    """|| (1/M) sum |a_x><a_x| - (1/M) sum |b_x><b_x| ||_1 for state vectors in the rows of a, b."""
    m = a.shape[0]
    stack = np.vstack([a, b]).T
    q, _ = np.linalg.qr(stack)
    c = q.conj().T @ stack
    signs = np.concatenate([np.ones(m), -np.ones(m)]) / m
    w = np.linalg.eigvalsh((c * signs) @ c.conj().T)
    return float(np.abs(w).sum())


def _apply_query(states: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply V to the last register of every row."""
    n, dim = states.shape
    d_A = v.shape[1]
    return (states.reshape(n, dim // d_A, d_A) @ v.T).reshape(n, -1)


def simulate_protocol_gap(config: ProtocolConfig) -> ProtocolTrace:
    """Trace distances ||pi_k - xi_k||_1 along a random coherent protocol.

    Registers are kept as pure-state vectors ordered
    (B~_1, ..., B~_{k-1}, aux, A_k). Before query k >= 2 a Haar unitary on
    (aux, B~_{k-1}, A_k) acts with A_k fresh in |0>; its output is read as
    (B~_{k-1}, aux, A_k). The same interleaving unitaries serve every member.
    """
    isos = config.isometries
    v_list = [v.matrix for v in isos]
    d_A, d_out = isos[0].d_A, isos[0].d_E * isos[0].d_B
    aux = config.aux_dim
    rng = SeededRng(config.seed)
    psi0 = random_pure_state(derive_substream(rng, 0).generator(), aux * d_A)
    states = np.tile(psi0, (len(isos), 1))
    gaps, f_diag = [], []
    for k in range(1, config.N_queries + 1):
        if k > 1:
            dim_u = aux * d_out * d_A
            if states.shape[1] * d_A > config.max_dim:
                raise SimulationOverflow(f"dimension overflow: state would exceed {config.max_dim}")
            u = haar_unitary(derive_substream(rng, k).generator(), dim_u)
            hist = states.shape[1] // (aux * d_out)
            # embed |0>_{A_k} then act on the (aux, B~_{k-1}, A_k) block
            padded = np.zeros((states.shape[0], hist, aux * d_out, d_A), complex)
            padded[..., 0] = states.reshape(states.shape[0], hist, aux * d_out)
            states = (padded.reshape(states.shape[0], hist, dim_u) @ u.T).reshape(states.shape[0], -1)
        if states.shape[1] // d_A * d_out > config.max_dim:
            raise SimulationOverflow(f"dimension overflow: state would exceed {config.max_dim}")
        pi = np.vstack([_apply_query(states[x:x + 1], v_list[x]) for x in range(len(isos))])
        xi = _apply_query(states, v_list[0])
        gaps.append(mixture_gap(pi, xi))
        if k == 1 and config.flag_register:
            f_diag = [_f_register_diagonal(row, isos[0]) for row in pi]
        states = pi
    eta = max_pairwise_isometry_distance(isos)
    return ProtocolTrace(gaps, eta, f_diag)


def _f_register_diagonal(vec: np.ndarray, iso: Isometry) -> tuple | None:
    """Diagonal of the flag-register marginal when the output is (E, F, B) with |F| = 2."""
    if iso.d_B % 2:
        return None
    e, b = iso.d_E, iso.d_B // 2
    amp = vec.reshape(-1, e, 2, b)
    p = np.sum(np.abs(amp) ** 2, axis=(0, 1, 3))
    return float(p[0]), float(p[1])
