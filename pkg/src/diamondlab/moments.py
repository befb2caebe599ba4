"""Monte Carlo checks of the moment identities behind the first-moment lower bound.

Every estimator draws its Haar unitaries from per-sample substreams of the
supplied :class:`SeededRng`, so a report is reproducible from its seed alone.
Verdicts use a 4-sigma rule; see :class:`MomentReport`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .channels import Isometry, choi_matrix
from .ensembles import (
    Case,
    EnsembleParams,
    IsometryFactory,
    RegimeError,
    build_O_bar,
)
from .haar import SeededRng, haar_unitary, monte_carlo, random_hermitian
from .matrix_core import DimensionError, pair_two_norm, singular_values

SIGMAS = 4.0


@dataclass
class MomentReport:
    quantity: str
    estimate: float
    stderr: float
    target: float
    relation: str  # "equals" | "at_least" | "at_most"
    samples: int
    seed: int
    anchor: str = ""
    verdict: str = ""

    def __post_init__(self):
        if self.relation not in ("equals", "at_least", "at_most"):
            raise ValueError(f"unknown relation {self.relation!r}")
        if not self.verdict:
            self.verdict = judge(self.estimate, self.stderr, self.target, self.relation, self.samples)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    @property
    def z_score(self) -> float:
        if self.stderr == 0 or not math.isfinite(self.stderr):
            return 0.0 if self.estimate == self.target else math.copysign(math.inf, self.estimate - self.target)
        return (self.estimate - self.target) / self.stderr

    def row(self) -> dict:
        return asdict(self)


def judge(estimate: float, stderr: float, target: float, relation: str, samples: int = 2) -> str:
    if samples < 2 and stderr != 0:
        return "INCONCLUSIVE"
    slack = SIGMAS * stderr
    if relation == "equals":
        ok = abs(estimate - target) <= slack
    elif relation == "at_most":
        ok = estimate - target <= slack
    else:
        ok = target - estimate <= slack
    return "PASS" if ok else "FAIL"


def mean_and_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


# -- operators ------------------------------------------------------------------

def entangled_cross(x: np.ndarray, y: np.ndarray, d_A: int, d_B: int, d_E: int) -> np.ndarray:
    """Tr_E[(1 (x) X) Psi (1 (x) Y)^dag] on A' (x) B, for X, Y : A -> E (x) B."""
    mx = (np.asarray(x).T / math.sqrt(d_A)).reshape(d_A, d_E, d_B)
    my = (np.asarray(y).T / math.sqrt(d_A)).reshape(d_A, d_E, d_B)
    return np.einsum("aeb,ced->abcd", mx, my.conj()).reshape(d_A * d_B, d_A * d_B)


def c_operator(v0: Isometry, u1: np.ndarray, u2: np.ndarray, s: np.ndarray) -> np.ndarray:
    """C = Tr_E[V0 Psi (U1 S - U2 S)^dag]."""
    d = v0.d_E * v0.d_B
    if u1.shape != (d, d) or u2.shape != (d, d) or s.shape != (d, v0.d_A):
        raise DimensionError("c_operator: shapes incompatible with the reference isometry")
    return entangled_cross(v0.matrix, (u1 - u2) @ s, v0.d_A, v0.d_B, v0.d_E)


def d_operator(u1: np.ndarray, u2: np.ndarray, o_bar: np.ndarray, d_B: int) -> np.ndarray:
    """D = A_1 + A_1^dag - A_2 - A_2^dag with A_i = Tr_E[U_i Obar U_i^dag Psi]."""
    d_A = o_bar.shape[0]
    if u1.shape != (d_A, d_A) or u2.shape != (d_A, d_A) or d_A % d_B:
        raise DimensionError("d_operator: shapes incompatible")
    r = d_A // d_B
    eye = np.eye(d_A)
    a1 = entangled_cross(u1 @ o_bar @ u1.conj().T, eye, d_A, d_B, r)
    a2 = entangled_cross(u2 @ o_bar @ u2.conj().T, eye, d_A, d_B, r)
    return a1 + a1.conj().T - a2 - a2.conj().T


def choi_distance_fn(params: EnsembleParams):
    """f(U1, U2) = ||J_1 - J_2||_1 for the construction selected by ``params``."""
    make = IsometryFactory(params)
    d_A, d_out, r = params.d_A, params.output_dim, params.r

    def f(u1, u2):
        j1 = choi_matrix(make.matrix(u1), d_A, d_out, r)
        j2 = choi_matrix(make.matrix(u2), d_A, d_out, r)
        return float(np.sum(singular_values(j1 - j2)))

    return f


def lipschitz_constant(d_A: int, eps: float) -> float:
    return 4 * math.sqrt(2 / d_A) * eps


# -- tilted case: C moments -------------------------------------------------------

def _require(params: EnsembleParams, case: Case):
    if params.case is not case:
        raise RegimeError(f"this estimator needs the {case.value} case, got {params.case.value}")


def c_moment_samples(params: EnsembleParams, samples: int, rng: SeededRng, workers: int = 1) -> np.ndarray:
    """Per-sample (Tr|C|, Tr|C|^2, Tr|C|^4), shape (samples, 3)."""
    _require(params, Case.TILTED)
    make = IsometryFactory(params)
    d = params.unitary_dim

    def one(g):
        u1 = haar_unitary(g, d)
        u2 = haar_unitary(g, d)
        sv = singular_values(c_operator(make.v0, u1, u2, make.S))
        sq = sv * sv
        return sv.sum(), sq.sum(), (sq * sq).sum()

    return monte_carlo(one, rng, samples, workers).reshape(samples, 3)


def estimate_c_second_moment(params: EnsembleParams, samples: int = 5000, rng: SeededRng | None = None,
                             workers: int = 1) -> MomentReport:
    rng = rng or SeededRng(params.seed)
    est, se = mean_and_stderr(c_moment_samples(params, samples, rng, workers)[:, 1])
    return MomentReport("E Tr|C|^2", est, se, 2 / params.r, "equals", samples, rng.seed,
                        "E Tr|C|^2 = 2/r")


def estimate_c_fourth_moment(params: EnsembleParams, samples: int = 20000, rng: SeededRng | None = None,
                             workers: int = 1) -> MomentReport:
    rng = rng or SeededRng(params.seed)
    est, se = mean_and_stderr(c_moment_samples(params, samples, rng, workers)[:, 2])
    return MomentReport("E Tr|C|^4", est, se, 128 / params.r ** 3, "at_most", samples, rng.seed,
                        "E Tr|C|^4 <= 128/r^3")


def holder_first_moment_bound(m2: float, m4: float) -> float:
    """Lower bound sqrt(m2^3 / m4) on E Tr|C| from the second and fourth moments."""
    if m2 <= 0 or m4 <= 0:
        raise ValueError("moments must be positive")
    return math.sqrt(m2 ** 3 / m4)


def holder_check(params: EnsembleParams, samples: int = 20000, rng: SeededRng | None = None,
                 workers: int = 1) -> list[MomentReport]:
    """Sampled E Tr|C| against the Hoelder bound from sampled moments and against 1/4."""
    rng = rng or SeededRng(params.seed)
    data = c_moment_samples(params, samples, rng, workers)
    m1, se1 = mean_and_stderr(data[:, 0])
    m2 = float(data[:, 1].mean())
    m4 = float(data[:, 2].mean())
    exact = holder_first_moment_bound(2 / params.r, 128 / params.r ** 3)
    return [
        MomentReport("E Tr|C| vs sampled Hoelder bound", m1, se1, holder_first_moment_bound(m2, m4),
                     "at_least", samples, rng.seed, "(E Tr|C|)^2 >= (E Tr|C|^2)^3 / E Tr|C|^4"),
        MomentReport("E Tr|C| vs exact Hoelder bound", m1, se1, exact, "at_least", samples, rng.seed,
                     "(E Tr|C|)^2 >= (2/r)^3 / (128/r^3) = 1/16"),
    ]


def first_moment_target(eps: float) -> float:
    return 0.5 * eps * math.sqrt(1 - eps * eps) - 2 * eps * eps


def estimate_first_moment_tilted(params: EnsembleParams, samples: int = 2000, rng: SeededRng | None = None,
                                 workers: int = 1) -> MomentReport:
    _require(params, Case.TILTED)
    rng = rng or SeededRng(params.seed)
    f = choi_distance_fn(params)
    d = params.unitary_dim
    vals = monte_carlo(lambda g: f(haar_unitary(g, d), haar_unitary(g, d)), rng, samples, workers)
    est, se = mean_and_stderr(vals)
    return MomentReport("E ||J1 - J2||_1 (tilted)", est, se, first_moment_target(params.eps), "at_least",
                        samples, rng.seed, "E||J1-J2||_1 >= 0.5 eps sqrt(1-eps^2) - 2 eps^2")


# -- equal case: D moments ----------------------------------------------------------

def o_bar_traces(d_A: int, eps: float) -> tuple[float, float, complex]:
    """(Tr[Obar Obar^dag], Tr[(Obar Obar^dag)^2], Tr[Obar^2])."""
    ob = build_O_bar(d_A, eps)
    p = ob @ ob.conj().T
    return float(np.trace(p).real), float(np.trace(p @ p).real), complex(np.trace(ob @ ob))


def d_second_moment_formula(params: EnsembleParams) -> float:
    """Two-term closed form for E Tr|D|^2 as stated with the construction."""
    t2, _, _ = o_bar_traces(params.d_A, params.eps)
    d_A, r = params.d_A, params.r
    return (2 / r) * t2 / d_A + 4 * r * t2 / (d_A ** 2 * (d_A + 1))


def d_second_moment_lower_bound(params: EnsembleParams) -> float:
    t2, _, _ = o_bar_traces(params.d_A, params.eps)
    return (2 / params.r) * t2 / params.d_A


def d_second_moment_exact(params: EnsembleParams) -> float:
    """E Tr|D|^2 recomputed from scratch.

    E Tr[A A^dag] = Tr[Obar^dag Obar] / (r d_A) holds for every U, and
    E Tr[A A] = d_B (r^2 - 1) Tr[Obar^2] / (d_A^2 (d_A^2 - 1)) by second-order
    Weingarten calculus; E Tr D^2 = 4 E Tr[A A^dag] + 4 Re E Tr[A A].
    """
    t2, _, tsq = o_bar_traces(params.d_A, params.eps)
    d_A, d_B, r = params.d_A, params.d_B, params.r
    return 4 * t2 / (r * d_A) + 4 * d_B * (r * r - 1) * tsq.real / (d_A ** 2 * (d_A ** 2 - 1))


def d_fourth_moment_bound(params: EnsembleParams) -> float:
    t2, t4, _ = o_bar_traces(params.d_A, params.eps)
    d_A, d_B, r = params.d_A, params.d_B, params.r
    return 4 ** 4 * 2 / (r * r * d_A ** 3) * (t2 * t2 * d_B + t4 * r)


def d_moment_samples(params: EnsembleParams, samples: int, rng: SeededRng, workers: int = 1) -> np.ndarray:
    """Per-sample (Tr|D|, Tr|D|^2, Tr|D|^4), shape (samples, 3)."""
    _require(params, Case.EQUAL)
    ob = build_O_bar(params.d_A, params.eps)
    d = params.d_A

    def one(g):
        u1 = haar_unitary(g, d)
        u2 = haar_unitary(g, d)
        w = np.linalg.eigvalsh(d_operator(u1, u2, ob, params.d_B))
        sq = w * w
        return np.abs(w).sum(), sq.sum(), (sq * sq).sum()

    return monte_carlo(one, rng, samples, workers).reshape(samples, 3)


def estimate_d_second_moment(params: EnsembleParams, samples: int = 5000, rng: SeededRng | None = None,
                             workers: int = 1) -> list[MomentReport]:
    """E Tr|D|^2 against the stated two-term formula, the recomputed exact
    value, and the stated lower bound."""
    rng = rng or SeededRng(params.seed)
    est, se = mean_and_stderr(d_moment_samples(params, samples, rng, workers)[:, 1])
    return [
        MomentReport("E Tr|D|^2 vs stated formula", est, se, d_second_moment_formula(params), "equals",
                     samples, rng.seed,
                     "E Tr|D|^2 = (2/r)Tr[Obar^dag Obar]/d_A + 4r Tr[Obar Obar^dag]/(d_A^2(d_A+1))"),
        MomentReport("E Tr|D|^2 vs recomputed exact value", est, se, d_second_moment_exact(params), "equals",
                     samples, rng.seed,
                     "E Tr|D|^2 = (4/r)Tr[Obar^dag Obar]/d_A + 4 d_B(r^2-1)Re Tr[Obar^2]/(d_A^2(d_A^2-1))"),
        MomentReport("E Tr|D|^2 lower bound", est, se, d_second_moment_lower_bound(params), "at_least",
                     samples, rng.seed, "E Tr|D|^2 >= (2/r)Tr[Obar^dag Obar]/d_A"),
    ]


def estimate_d_fourth_moment(params: EnsembleParams, samples: int = 20000, rng: SeededRng | None = None,
                             workers: int = 1) -> MomentReport:
    rng = rng or SeededRng(params.seed)
    est, se = mean_and_stderr(d_moment_samples(params, samples, rng, workers)[:, 2])
    return MomentReport("E Tr|D|^4", est, se, d_fourth_moment_bound(params), "at_most", samples, rng.seed,
                        "E Tr|D|^4 <= 4^4 (2/(r^2 d_A^3)) ((Tr Obar Obar^dag)^2 d_B + Tr[(Obar Obar^dag)^2] r)")


# -- Lipschitz constant and concentration ----------------------------------------------

def perturb_unitary(u: np.ndarray, h: np.ndarray, scale: float) -> np.ndarray:
    """exp(i * scale * H) U for Hermitian H."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * scale * w)) @ q.conj().T @ u


def lipschitz_ratios(params: EnsembleParams, pair_samples: int, perturbation_scale: float,
                     rng: SeededRng, workers: int = 1) -> np.ndarray:
    if perturbation_scale <= 0:
        raise ValueError("perturbation_scale must be positive")
    f = choi_distance_fn(params)
    d = params.unitary_dim

    def one(g):
        u1, u2 = haar_unitary(g, d), haar_unitary(g, d)
        p1 = perturb_unitary(u1, random_hermitian(g, d, 1.0), perturbation_scale)
        p2 = perturb_unitary(u2, random_hermitian(g, d, 1.0), perturbation_scale)
        return abs(f(u1, u2) - f(p1, p2)) / pair_two_norm(u1 - p1, u2 - p2)

    return monte_carlo(one, rng, pair_samples, workers)


def estimate_lipschitz_ratio(params: EnsembleParams, pair_samples: int = 500, perturbation_scale: float = 1e-3,
                             rng: SeededRng | None = None, workers: int = 1) -> MomentReport:
    rng = rng or SeededRng(params.seed)
    ratios = lipschitz_ratios(params, pair_samples, perturbation_scale, rng, workers)
    return MomentReport(f"max Lipschitz ratio ({params.case.value})", float(ratios.max()), 0.0,
                        lipschitz_constant(params.d_A, params.eps) + 1e-6, "at_most", pair_samples,
                        rng.seed, "L = 4 sqrt(2/d_A) eps")


@dataclass
class TailRow:
    t: float
    bound: float
    upper_freq: float
    upper_stderr: float
    lower_freq: float
    lower_stderr: float

    @property
    def passed(self) -> bool:
        return (self.upper_freq <= self.bound + SIGMAS * self.upper_stderr
                and self.lower_freq <= self.bound + SIGMAS * self.lower_stderr)


@dataclass
class ConcentrationReport:
    params: EnsembleParams
    samples: int
    seed: int
    mean: float
    lipschitz: float
    dimension: int
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def concentration_bound(t: float, dimension: int, lipschitz: float) -> float:
    return math.exp(-dimension * t * t / (12 * lipschitz * lipschitz))


def default_t_grid(params: EnsembleParams) -> list[float]:
    """Five deviations at which the tail bound equals exp(-c^2), c in {0.25, .5, 1, 1.5, 2}."""
    scale = lipschitz_constant(params.d_A, params.eps) * math.sqrt(12 / params.unitary_dim)
    return [c * scale for c in (0.25, 0.5, 1.0, 1.5, 2.0)]


def concentration_experiment(params: EnsembleParams, samples: int = 5000, t_grid: Sequence[float] | None = None,
                             rng: SeededRng | None = None, workers: int = 1) -> ConcentrationReport:
    """Empirical upper and lower tails of f around its sample mean."""
    rng = rng or SeededRng(params.seed)
    t_grid = list(t_grid) if t_grid is not None else default_t_grid(params)
    if any(t <= 0 for t in t_grid):
        raise ValueError("t_grid must be positive")
    f = choi_distance_fn(params)
    d = params.unitary_dim
    vals = monte_carlo(lambda g: f(haar_unitary(g, d), haar_unitary(g, d)), rng, samples, workers)
    mean = float(vals.mean())
    lip = lipschitz_constant(params.d_A, params.eps)
    rows = []
    for t in t_grid:
        up = float(np.mean(vals >= mean + t))
        lo = float(np.mean(vals <= mean - t))
        rows.append(TailRow(t, concentration_bound(t, d, lip),
                            up, math.sqrt(up * (1 - up) / samples),
                            lo, math.sqrt(lo * (1 - lo) / samples)))
    return ConcentrationReport(params, samples, rng.seed, mean, lip, d, rows)
