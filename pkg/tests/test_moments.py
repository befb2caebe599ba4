import math

import numpy as np
import pytest

from diamondlab.channels import choi_matrix
from diamondlab.ensembles import Case, EnsembleParams, IsometryFactory, RegimeError, build_O_bar
from diamondlab.haar import SeededRng, haar_unitary
from diamondlab.matrix_core import DimensionError
from diamondlab.moments import (
    MomentReport,
    c_operator,
    concentration_bound,
    concentration_experiment,
    d_fourth_moment_bound,
    d_operator,
    d_second_moment_exact,
    d_second_moment_formula,
    d_second_moment_lower_bound,
    default_t_grid,
    entangled_cross,
    estimate_c_fourth_moment,
    estimate_c_second_moment,
    estimate_d_fourth_moment,
    estimate_d_second_moment,
    estimate_first_moment_tilted,
    estimate_lipschitz_ratio,
    first_moment_target,
    holder_check,
    holder_first_moment_bound,
    judge,
    lipschitz_constant,
    perturb_unitary,
)

EQ = EnsembleParams(4, 2, 2, 0.2)
TI = EnsembleParams(4, 4, 2, 0.1, case=Case.TILTED)


def test_judge_relations():
    assert judge(1.0, 0.1, 1.3, "equals") == "PASS"
    assert judge(1.0, 0.1, 1.5, "equals") == "FAIL"
    assert judge(1.3, 0.1, 1.0, "at_most") == "PASS"
    assert judge(1.5, 0.1, 1.0, "at_most") == "FAIL"
    assert judge(0.5, 0.1, 1.0, "at_least") == "FAIL"
    assert judge(0.5, 0.0, 0.5, "at_least") == "PASS"


def test_single_sample_report_is_well_formed():
    rep = estimate_c_second_moment(TI, samples=1, rng=SeededRng(0))
    assert rep.stderr == math.inf and rep.verdict == "INCONCLUSIVE"
    with pytest.raises(ValueError):
        MomentReport("x", 0, 0, 0, "roughly", 1, 0)


def test_entangled_cross_reduces_to_choi(gen):
    v = IsometryFactory(EnsembleParams(4, 2, 2, 0.1)).matrix(haar_unitary(gen, 4))
    np.testing.assert_allclose(entangled_cross(v, v, 4, 2, 2), choi_matrix(v, 4, 2, 2), atol=1e-15)


def test_c_operator_vanishes_for_equal_unitaries(gen):
    make = IsometryFactory(TI)
    u = haar_unitary(gen, 8)
    assert np.abs(c_operator(make.v0, u, u, make.S)).max() == 0
    with pytest.raises(DimensionError):
        c_operator(make.v0, u[:4, :4], u, make.S)


def test_first_step_is_deterministic(gen):
    # Tr[A A^dag] = Tr[Obar^dag Obar] / (r d_A) for every U
    ob = build_O_bar(4, 0.2)
    for _ in range(5):
        u = haar_unitary(gen, 4)
        a = entangled_cross(u @ ob @ u.conj().T, np.eye(4), 4, 2, 2)
        assert np.trace(a @ a.conj().T).real == pytest.approx(0.1584 / 8, abs=1e-15)


def test_d_operator_hermitian_and_zero_for_equal_unitaries(gen):
    ob = build_O_bar(4, 0.2)
    u1, u2 = haar_unitary(gen, 4), haar_unitary(gen, 4)
    d = d_operator(u1, u2, ob, 2)
    np.testing.assert_allclose(d, d.conj().T, atol=1e-15)
    assert np.abs(d_operator(u1, u1, ob, 2)).max() < 1e-16


def test_closed_form_values():
    assert d_second_moment_formula(EQ) == pytest.approx(0.05544, abs=1e-15)
    assert d_second_moment_exact(EQ) == pytest.approx(0.06336, abs=1e-15)
    assert d_second_moment_lower_bound(EQ) == pytest.approx(0.0396, abs=1e-15)
    assert d_fourth_moment_bound(EQ) == pytest.approx(0.1254528, abs=1e-12)
    p = EnsembleParams(8, 4, 2, 0.1)
    assert d_second_moment_formula(p) == pytest.approx(0.011083333333333334, abs=1e-15)
    assert d_second_moment_exact(p) == pytest.approx(0.019, abs=1e-15)
    assert first_moment_target(0.1) == pytest.approx(0.02974937185533, abs=1e-13)
    assert holder_first_moment_bound(1.0, 16.0) == 0.25
    assert lipschitz_constant(4, 0.1) == pytest.approx(0.4 / math.sqrt(2))


def test_estimators_check_case():
    with pytest.raises(RegimeError):
        estimate_c_second_moment(EQ, 10)
    with pytest.raises(RegimeError):
        estimate_d_second_moment(TI, 10)


def test_c_second_moment_small_run():
    rep = estimate_c_second_moment(TI, 1000, SeededRng(3))
    assert rep.target == 1.0 and rep.passed


@pytest.mark.slow
@pytest.mark.parametrize("dims", [(4, 4, 2), (4, 2, 4), (2, 4, 2)])
def test_c_moments(dims):
    p = EnsembleParams(*dims, 0.1, case=Case.TILTED)
    m2 = estimate_c_second_moment(p, 5000, SeededRng(11))
    assert m2.passed and abs(m2.estimate - m2.target) <= 0.05 * m2.target
    assert estimate_c_fourth_moment(p, 5000, SeededRng(12)).passed
    assert all(r.passed for r in holder_check(p, 5000, SeededRng(13)))


@pytest.mark.slow
def test_d_second_moment_matches_recomputed_value_not_stated_formula():
    stated, exact, lower = estimate_d_second_moment(EQ, 20000, SeededRng(5))
    assert exact.passed and lower.passed
    assert not stated.passed and stated.z_score > 4


@pytest.mark.slow
def test_d_second_moment_second_grid_point():
    stated, exact, lower = estimate_d_second_moment(EnsembleParams(8, 4, 2, 0.1), 5000, SeededRng(6))
    assert exact.passed and lower.passed and not stated.passed


def test_d_fourth_and_first_moment():
    assert estimate_d_fourth_moment(EQ, 1000, SeededRng(7)).passed
    rep = estimate_first_moment_tilted(TI, 500, SeededRng(8))
    assert rep.passed and rep.estimate > rep.target


def test_perturb_unitary_stays_unitary(gen):
    u = haar_unitary(gen, 5)
    h = np.diag([1.0, 0, 0, 0, 0])
    w = perturb_unitary(u, h, 0.3)
    np.testing.assert_allclose(w.conj().T @ w, np.eye(5), atol=1e-13)
    np.testing.assert_allclose(w[0], np.exp(0.3j) * u[0], atol=1e-13)


@pytest.mark.parametrize("params", [EnsembleParams(4, 2, 2, 0.1), TI])
def test_lipschitz_ratio(params):
    rep = estimate_lipschitz_ratio(params, 100, 1e-3, SeededRng(9))
    assert rep.passed and rep.stderr == 0


def test_concentration_grid_and_bound():
    p = EnsembleParams(4, 2, 2, 0.1)
    grid = default_t_grid(p)
    assert len(grid) == 5
    assert concentration_bound(grid[2], 4, lipschitz_constant(4, 0.1)) == pytest.approx(math.exp(-1))
    rep = concentration_experiment(p, 500, rng=SeededRng(10))
    assert rep.passed and len(rep.rows) == 5
    with pytest.raises(ValueError):
        concentration_experiment(p, 10, t_grid=[0.0])
