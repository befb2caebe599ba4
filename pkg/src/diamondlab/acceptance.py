"""The thirteen acceptance criteria as runnable checks.

Each check returns a :class:`CriterionResult`; ``run_all`` executes them in
order. Sample counts and tolerances are the ones fixed by the acceptance
contract; ``scale`` shrinks sample counts for smoke runs only.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import bounds as B
from .channels import choi_trace_distance, isometry_distance, isometry_residual
from .ensembles import (
    Case,
    EnsembleParams,
    IsometryFactory,
    build_reference_kraus,
    generate_ensemble,
)
from .haar import SeededRng, derive_substream, haar_unitary, random_density_matrix, random_pure_state
from .matrix_core import partial_trace
from .moments import (
    c_moment_samples,
    concentration_experiment,
    d_moment_samples,
    d_second_moment_exact,
    d_second_moment_formula,
    holder_first_moment_bound,
    lipschitz_constant,
    lipschitz_ratios,
    mean_and_stderr,
)
from .weingarten import Permutation, haar_moment_closed_form, mc_haar_moment, wg_exact

C_GRID = [(4, 4, 2), (4, 2, 4), (2, 4, 2)]
EQUAL_GRID = [(2, 1, 2), (4, 2, 2), (4, 1, 4), (6, 3, 2), (8, 4, 2), (9, 3, 3)]
TILTED_GRID = [(4, 4, 2), (4, 2, 4), (2, 4, 2), (3, 2, 3), (5, 2, 5), (2, 2, 2)]
KRAUS_GRID = [(a, b, r) for a in range(1, 9) for b in range(1, 6) for r in range(1, 9)
              if 2 * a <= r * b and r <= a * b]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.name}: {self.detail}"

    def row(self) -> dict:
        return dict(criterion=self.number, name=self.name, verdict="PASS" if self.passed else "FAIL",
                    detail=self.detail, seconds=round(self.seconds, 3))


def _n(samples: int, scale: float) -> int:
    return max(200, int(samples * scale))


def c1_weingarten(seed: int, scale: float = 1.0) -> CriterionResult:
    table_ok = True
    for d in range(2, 9):
        table_ok &= wg_exact(Permutation.parse("(1)"), d) == Fraction(1, d)
        table_ok &= wg_exact(Permutation.parse("(1)(2)"), d) == Fraction(1, d * d - 1)
        table_ok &= wg_exact(Permutation.parse("(12)"), d) == Fraction(-1, d * (d * d - 1))
    d = 3
    g = SeededRng(seed, 101).generator()
    a = [random_density_matrix(g, d) for _ in range(2)]
    b = [random_density_matrix(g, d) for _ in range(2)]
    samples = _n(100_000, scale)
    t0 = time.perf_counter()
    est, se = mc_haar_moment(a, b, d, samples, SeededRng(seed, 102))
    took = time.perf_counter() - t0
    cf = haar_moment_closed_form(a, b, d)
    z = abs(est - cf) / se
    ok = table_ok and z <= 4 and took < 120
    return CriterionResult(1, "Weingarten table and second-moment formula", ok,
                           f"table exact={table_ok}; d=3 n=2 closed={cf.real:.6f} est={est.real:.6f} "
                           f"z={z:.2f} ({samples} samples, {took:.1f}s)")


_c_cache: dict = {}


def _c_data(grid_point, samples, seed):
    key = (grid_point, samples, seed)
    if key not in _c_cache:
        p = EnsembleParams(*grid_point, 0.1, case=Case.TILTED)
        _c_cache[key] = c_moment_samples(p, samples, SeededRng(seed, 200 + C_GRID.index(grid_point)))
    return _c_cache[key]


def c2_c_second(seed: int, scale: float = 1.0) -> CriterionResult:
    samples, parts, ok = _n(5000, scale), [], True
    t0 = time.perf_counter()
    for pt in C_GRID:
        est, se = mean_and_stderr(_c_data(pt, samples, seed)[:, 1])
        target = 2 / pt[2]
        good = abs(est - target) <= 4 * se and abs(est - target) <= 0.05 * target
        ok &= good
        parts.append(f"{pt}: {est:.4f}+-{se:.4f} vs {target:g}")
    took = time.perf_counter() - t0
    ok &= took < 300
    return CriterionResult(2, "E Tr|C|^2 = 2/r", ok, "; ".join(parts))


def c3_c_fourth(seed: int, scale: float = 1.0) -> CriterionResult:
    samples, parts, ok = _n(20000, scale), [], True
    for pt in C_GRID:
        est, se = mean_and_stderr(_c_data(pt, samples, seed)[:, 2])
        target = 128 / pt[2] ** 3
        ok &= est <= target + 4 * se
        parts.append(f"{pt}: {est:.4f}+-{se:.4f} <= {target:g}")
    return CriterionResult(3, "E Tr|C|^4 <= 128/r^3", ok, "; ".join(parts))


def c4_holder(seed: int, scale: float = 1.0) -> CriterionResult:
    samples, parts, ok = _n(20000, scale), [], True
    for pt in C_GRID:
        data = _c_data(pt, samples, seed)
        m1, se1 = mean_and_stderr(data[:, 0])
        hb = holder_first_moment_bound(data[:, 1].mean(), data[:, 2].mean())
        r = pt[2]
        exact = holder_first_moment_bound(2 / r, 128 / r ** 3)
        good = hb <= m1 + 4 * se1 and math.isclose(exact ** 2, 1 / 16, rel_tol=1e-12) and m1 + 4 * se1 >= exact
        ok &= good
        parts.append(f"{pt}: sqrt(m2^3/m4)={hb:.4f} <= E Tr|C|={m1:.4f}; exact bound {exact:g}")
    return CriterionResult(4, "Hoelder chain for E Tr|C|", ok, "; ".join(parts))


def c5_d_second(seed: int, scale: float = 1.0) -> CriterionResult:
    samples, parts, ok = _n(20000, scale), [], True
    for i, pt in enumerate([(4, 2, 2, 0.2), (8, 4, 2, 0.1)]):
        p = EnsembleParams(*pt, case=Case.EQUAL)
        est, se = mean_and_stderr(d_moment_samples(p, samples, SeededRng(seed, 500 + i))[:, 1])
        target = d_second_moment_formula(p)
        z = (est - target) / se
        ok &= abs(z) <= 4
        exact = d_second_moment_exact(p)
        parts.append(f"{pt}: {est:.5f}+-{se:.5f} vs stated {target:.5f} (z={z:.1f}); "
                     f"recomputed {exact:.5f} (z={(est - exact) / se:.1f})")
    return CriterionResult(5, "E Tr|D|^2 two-term formula", ok, "; ".join(parts))


def _grid_params(case, pt, eps=0.1, M=10, seed=0):
    return EnsembleParams(*pt, eps, M=M, seed=seed, case=case)


def c6_certification(seed: int, scale: float = 1.0) -> CriterionResult:
    worst_res, worst_excess, bad = 0.0, -math.inf, []
    for case, grid in ((Case.EQUAL, EQUAL_GRID), (Case.TILTED, TILTED_GRID)):
        for pt in grid:
            ens = generate_ensemble(_grid_params(case, pt, seed=seed))
            eps = ens.params.eps
            for i, v in enumerate(ens.isometries):
                worst_res = max(worst_res, isometry_residual(v.matrix))
                for w in ens.isometries[i + 1:]:
                    worst_excess = max(worst_excess, isometry_distance(v, w) - 2 * eps)
    for pt in KRAUS_GRID:
        k = build_reference_kraus(*pt)
        gram = np.array([[np.trace(a.conj().T @ b) for b in k.operators] for a in k.operators])
        off = np.abs(gram - np.diag(np.diag(gram))).max()
        diag = np.abs(np.diag(gram)).max()
        if (k.completeness_residual() > 1e-10 or off > 1e-10 or diag > 2 * pt[0] / pt[2] + 1e-10
                or len(k) > pt[2]):
            bad.append(pt)
    ok = worst_res <= 1e-10 and worst_excess <= 1e-12 and not bad
    return CriterionResult(6, "construction certification", ok,
                           f"max isometry residual {worst_res:.1e}; max(dist - 2 eps) {worst_excess:.1e}; "
                           f"{len(KRAUS_GRID)} Kraus grid points, {len(bad)} bad")


def c7_partial_traces(seed: int, scale: float = 1.0) -> CriterionResult:
    worst = 0.0
    inputs = 0
    for idx, pt in enumerate(TILTED_GRID):
        p = _grid_params(Case.TILTED, pt, eps=0.1, M=1)
        make = IsometryFactory(p)
        d_E, d_B, eps = p.r, p.d_B, p.eps
        g = SeededRng(seed, 700 + idx).generator()
        for _ in range(100 if idx == 0 else 20):
            u = haar_unitary(g, p.unitary_dim)
            phi = random_pure_state(g, p.d_A)
            rho_in = np.outer(phi, phi.conj())
            v = make.matrix(u)
            rho = v @ rho_in @ v.conj().T  # on (E, F, B)
            v0, vx = make.v0.matrix, u @ make.S
            want_eb = (1 - eps ** 2) * v0 @ rho_in @ v0.conj().T + eps ** 2 * vx @ rho_in @ vx.conj().T
            got_eb = partial_trace(rho, [0, 2], (d_E, 2, d_B))
            c = math.sqrt(1 - eps ** 2) * eps * np.trace(v0 @ rho_in @ vx.conj().T)
            want_f = np.array([[1 - eps ** 2, c], [np.conj(c), eps ** 2]])
            got_f = partial_trace(rho, [1], (d_E, 2, d_B))
            worst = max(worst, np.abs(got_eb - want_eb).max(), np.abs(got_f - want_f).max())
            inputs += 1
    return CriterionResult(7, "tilted flag-register block identities", worst <= 1e-10,
                           f"{inputs} random pure inputs, max entry error {worst:.1e}")


def c8_sandwich(seed: int, scale: float = 1.0) -> CriterionResult:
    violations, pairs, worst = 0, 0, 0.0
    for case, grid in ((Case.EQUAL, EQUAL_GRID), (Case.TILTED, TILTED_GRID)):
        for idx, pt in enumerate(grid):
            make = IsometryFactory(_grid_params(case, pt))
            root = SeededRng(seed, 800 + 10 * (case is Case.TILTED) + idx)
            for i in range(100):
                g = derive_substream(root, i).generator()
                v1 = make(haar_unitary(g, make.params.unitary_dim))
                v2 = make(haar_unitary(g, make.params.unitary_dim))
                lhs, rhs = choi_trace_distance(v1, v2), 2 * isometry_distance(v1, v2)
                worst = max(worst, lhs / rhs)
                violations += lhs > rhs
                pairs += 1
    return CriterionResult(8, "Choi distance <= 2 isometry distance", violations == 0,
                           f"{pairs} pairs, {violations} violations, max ratio {worst:.3f}")


def c9_lipschitz(seed: int, scale: float = 1.0) -> CriterionResult:
    parts, ok = [], True
    for idx, (case, pt) in enumerate([(Case.EQUAL, (4, 2, 2)), (Case.TILTED, (4, 4, 2))]):
        p = _grid_params(case, pt)
        ratios = lipschitz_ratios(p, _n(500, scale), 1e-3, SeededRng(seed, 900 + idx))
        bound = lipschitz_constant(p.d_A, p.eps) + 1e-6
        bad = int(np.sum(ratios > bound))
        ok &= bad == 0
        parts.append(f"{case.value}: max {ratios.max():.4f} <= {bound:.4f}, {bad} violations")
    return CriterionResult(9, "Lipschitz constant", ok, "; ".join(parts))


def c10_concentration(seed: int, scale: float = 1.0) -> CriterionResult:
    parts, ok = [], True
    for idx, (case, pt) in enumerate([(Case.EQUAL, (4, 2, 2)), (Case.TILTED, (4, 4, 2))]):
        rep = concentration_experiment(_grid_params(case, pt), _n(5000, scale), rng=SeededRng(seed, 1000 + idx))
        good = all(r.upper_freq <= r.bound + 4 * r.upper_stderr for r in rep.rows)
        ok &= good
        worst = max(r.upper_freq - r.bound for r in rep.rows)
        parts.append(f"{case.value}: max(freq - bound) {worst:.3f}")
    return CriterionResult(10, "concentration tail bound", ok, "; ".join(parts))


def c11_protocol(seed: int, scale: float = 1.0) -> CriterionResult:
    runs, violations, worst, fbad = 0, 0, 0.0, 0
    setups = [(Case.EQUAL, (4, 2, 2)), (Case.TILTED, (2, 2, 2))]
    for case, pt in setups:
        for s in range(10):
            ens = generate_ensemble(_grid_params(case, pt, M=4, seed=seed + s))
            tr = B.simulate_protocol_gap(B.ProtocolConfig(ens, 5, 2, seed=seed + s,
                                                          flag_register=case is Case.TILTED))
            runs += 1
            violations += sum(g > tr.bound + 1e-9 for g in tr.gaps)
            worst = max(worst, max(g / tr.bound for g in tr.gaps))
            eps = ens.params.eps
            fbad += sum(abs(a - (1 - eps ** 2)) > 1e-10 or abs(b - eps ** 2) > 1e-10 for a, b in tr.f_diagonals)
    return CriterionResult(11, "protocol gap <= 2 eta", violations == 0 and fbad == 0,
                           f"{runs} traces of 5 steps, {violations} violations, max gap/bound {worst:.3f}, "
                           f"{fbad} flag-diagonal mismatches")


def _random_state(g, dims):
    return random_density_matrix(g, int(np.prod(dims)), rank=int(g.integers(1, np.prod(dims) + 1)))


def c12_entropy(seed: int, scale: float = 1.0) -> CriterionResult:
    n = _n(1000, scale)
    g = SeededRng(seed, 1200).generator()
    dims = (2, 4)
    sub = tri = cont = 0
    for _ in range(n):
        rho = _random_state(g, dims)
        s_ab = B.von_neumann_entropy(rho)
        s_a = B.von_neumann_entropy(partial_trace(rho, [0], dims))
        s_b = B.von_neumann_entropy(partial_trace(rho, [1], dims))
        sub += s_ab > s_a + s_b + 1e-10
        tri += abs(s_a - s_b) > s_ab + 1e-10
    for _ in range(n):
        shared = _random_state(g, dims)
        out = []
        for _ in range(2):
            # random channel on A: unitary on (ancilla, A), then discard the ancilla
            u = haar_unitary(g, dims[0] * 2)
            anc = np.zeros((2, 2))
            anc[0, 0] = 1
            w = np.kron(u, np.eye(dims[1]))  # registers (ancilla, A, B)
            big = w @ np.kron(anc, shared) @ w.conj().T
            out.append(partial_trace(big, [1, 2], (2, dims[0], dims[1])))
        if not B.check_continuity_bound(out[0], out[1], dims).passed:
            cont += 1
    grid = np.linspace(0.001, 0.499, 499)
    h2bad = sum(B.binary_entropy(a) > 2 * a * math.log(1 / a) for a in grid)
    ok = sub == tri == cont == h2bad == 0
    return CriterionResult(12, "entropy inequalities", ok,
                           f"{n} states: subadditivity {sub}, triangle {tri}, continuity {cont} violations; "
                           f"h2 grid {h2bad} violations")


BOUND_EXAMPLES = [
    ("general M=20 eta=0.1 dBr=4", lambda: B.general_lower_bound(20, 0.1, 4), 1),
    ("general logM=300 eta=0.01 dBr=16", lambda: B.general_lower_bound(None, 0.01, 16, log_M=300), 676),
    ("main equal logM=300 eps=0.005 dBr=16", lambda: B.main_lower_bound(16, 4, 4, 0.005, log_M=300).N_main_equal,
     676),
    ("main tilted logM=300 eps=0.01 dBr=16",
     lambda: B.main_lower_bound(8, 4, 4, 0.01, case="tilted", log_M=300).N_main_tilted, 16884),
    ("packing logM=300 eps=0.01 dBr=16", lambda: B.packing_net_bound(8, 4, 4, 0.01, log_M=300).N_packing, 34),
]


def c13_bounds(seed: int, scale: float = 1.0) -> CriterionResult:
    parts, ok = [], True
    for name, fn, want in BOUND_EXAMPLES:
        got = fn()
        ok &= got == want
        if got != want:
            parts.append(f"{name}: got {got}, listed {want}")
    order_bad = []
    for eps in (0.01, 0.005, 0.001, 1e-4):
        pk = B.packing_net_bound(16, 4, 4, eps, log_M=300).N_packing
        eq = B.main_lower_bound(16, 4, 4, eps, log_M=300).N_main_equal
        ti = B.main_lower_bound(8, 4, 4, eps, case="tilted", log_M=300).N_main_tilted
        if not pk < eq < ti:
            order_bad.append(eps)
    ok &= not order_bad
    parts.append(f"ordering N_packing < N_equal < N_tilted fails at eps in {order_bad}" if order_bad
                 else "ordering holds for eps in {1e-2, 5e-3, 1e-3, 1e-4}")
    return CriterionResult(13, "bound calculators", ok, "; ".join(parts))


CRITERIA: list[Callable[..., CriterionResult]] = [
    c1_weingarten, c2_c_second, c3_c_fourth, c4_holder, c5_d_second, c6_certification, c7_partial_traces,
    c8_sandwich, c9_lipschitz, c10_concentration, c11_protocol, c12_entropy, c13_bounds,
]


def run_criterion(fn, seed: int, scale: float = 1.0) -> CriterionResult:
    t0 = time.perf_counter()
    res = fn(seed, scale)
    res.seconds = time.perf_counter() - t0
    return res


def run_all(seed: int = 0, scale: float = 1.0, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    _c_cache.clear()
    out = []
    for fn in CRITERIA:
        res = run_criterion(fn, seed, scale)
        if echo:
            echo(res.line())
        out.append(res)
    return out
