import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diamondlab.channels import choi_matrix, choi_rank, isometry_distance, isometry_residual
from diamondlab.ensembles import (
    Case,
    EnsembleParams,
    IsometryFactory,
    RegimeError,
    angle_for,
    build_embedding_S,
    build_isometry_equal_case,
    build_isometry_tilted,
    build_O,
    build_O_bar,
    build_reference_kraus,
    certify_ensemble,
    generalized_paulis,
    generate_ensemble,
    reference_isometry,
)
from diamondlab.haar import SeededRng, haar_unitary
from diamondlab.matrix_core import ContractError, operator_norm


def test_angle_satisfies_eps_relation():
    th = angle_for(0.1)
    assert -2 * math.cos(th) == pytest.approx(0.1, abs=1e-15)
    assert abs(1 + 0.1 * np.exp(1j * th)) == pytest.approx(1, abs=1e-15)


def test_O_even_and_odd():
    o = build_O(2, 0.1)
    np.testing.assert_allclose(np.abs(np.diag(o)), [0.1, 0.1])
    eye_o = np.eye(2) + o
    np.testing.assert_allclose(eye_o.conj().T @ eye_o, np.eye(2), atol=1e-12)
    assert build_O(3, 0.1)[2, 2] == 0
    assert operator_norm(build_O(5, 0.37)) == pytest.approx(0.37, abs=1e-15)
    with pytest.raises(RegimeError):
        build_O(2, 1.0)


def test_O_bar_values_at_4_0p2():
    ob = build_O_bar(4, 0.2)
    assert abs(np.trace(ob)) < 1e-15
    assert operator_norm(ob) == pytest.approx(0.2 * math.sqrt(0.99), abs=1e-15)
    p = ob.conj().T @ ob
    assert np.trace(p).real == pytest.approx(0.1584, abs=1e-15)
    assert np.trace(p @ p).real == pytest.approx(0.00627264, abs=1e-15)


@pytest.mark.parametrize("d_A", [2, 4, 6, 8])
@pytest.mark.parametrize("eps", [0.05, 0.3, 0.9])
def test_O_bar_identities_even(d_A, eps):
    ob = build_O_bar(d_A, eps)
    c = 1 - eps * eps / 4
    p = ob.conj().T @ ob
    np.testing.assert_allclose(np.abs(np.diag(ob)), eps * math.sqrt(c), atol=1e-15)
    assert np.trace(p).real == pytest.approx(d_A * eps * eps * c, rel=1e-13)
    assert np.trace(p @ p).real == pytest.approx(d_A * eps ** 4 * c * c, rel=1e-13)
    # even d_A: Obar^2 = -Obar^dag Obar entrywise on the diagonal
    assert np.trace(ob @ ob).real == pytest.approx(-np.trace(p).real, rel=1e-13)


def test_generalized_paulis_orthogonal():
    for d in (1, 2, 3, 4):
        ps = generalized_paulis(d)
        assert len(ps) == d * d
        gram = np.array([[np.trace(p.conj().T @ q) for q in ps] for p in ps])
        np.testing.assert_allclose(gram, d * np.eye(d * d), atol=1e-12)


def test_equal_case_identity_unitary():
    o = build_O(4, 0.1)
    v = build_isometry_equal_case(np.eye(4), o, d_B=2)
    np.testing.assert_allclose(v.matrix, np.eye(4) + o)
    assert (v.d_B, v.d_E) == (2, 2)
    with pytest.raises(ContractError):
        build_isometry_equal_case(2 * np.eye(4), o, d_B=2)


def test_equal_case_distance_to_identity_is_eps(gen):
    o = build_O(6, 0.2)
    v = build_isometry_equal_case(haar_unitary(gen, 6), o, d_B=3)
    assert operator_norm(v.matrix - np.eye(6)) == pytest.approx(0.2, abs=1e-13)


def test_embedding_S():
    s = build_embedding_S(2, 2, 2)
    assert s.shape == (4, 2) and s[0, 0] == s[1, 1] == 1 and s.sum() == 2
    np.testing.assert_array_equal(build_embedding_S(4, 2, 2), np.eye(4))
    with pytest.raises(ValueError):
        build_embedding_S(5, 2, 2)


def test_reference_kraus_examples():
    k = build_reference_kraus(2, 4, 2)
    assert len(k) == 1 and np.trace(k.operators[0].conj().T @ k.operators[0]).real == pytest.approx(2)
    k = build_reference_kraus(4, 2, 4)
    assert len(k) == 2 and k.completeness_residual() == 0


@pytest.mark.parametrize("dims", [(4, 4, 2), (4, 2, 4), (2, 4, 2), (3, 2, 3), (5, 2, 5), (7, 3, 5), (3, 2, 4),
                                  (2, 3, 2), (6, 4, 4)])
def test_reference_kraus_orthogonality(dims):
    d_A, d_B, r = dims
    k = build_reference_kraus(*dims)
    assert len(k) <= r
    assert k.completeness_residual() <= 1e-10
    gram = np.array([[np.trace(a.conj().T @ b) for b in k.operators] for a in k.operators])
    bound = 2 * d_A / r
    assert np.all(np.abs(gram) <= bound * np.eye(len(k)) + 1e-10)


def test_reference_kraus_rejects_out_of_regime():
    with pytest.raises(RegimeError):
        build_reference_kraus(5, 2, 4)
    # Kraus rank beyond d_A d_B: balanced operators cannot exist
    with pytest.raises(RegimeError):
        build_reference_kraus(1, 1, 4)


def test_tilted_eps_zero_ignores_U(gen):
    p = EnsembleParams(2, 2, 2, 0.1, case=Case.TILTED)
    v0, s = reference_isometry(p), build_embedding_S(2, 2, 2)
    a = build_isometry_tilted(haar_unitary(gen, 4), v0, s, 0.0)
    b = build_isometry_tilted(haar_unitary(gen, 4), v0, s, 0.0)
    np.testing.assert_array_equal(a.matrix, b.matrix)


def test_tilted_distance_formula(gen):
    p = EnsembleParams(4, 4, 2, 0.1, case=Case.TILTED)
    make = IsometryFactory(p)
    u1, u2 = haar_unitary(gen, 8), haar_unitary(gen, 8)
    d = isometry_distance(make(u1), make(u2))
    assert d == pytest.approx(0.1 * operator_norm(u1 @ make.S - u2 @ make.S), rel=1e-12)
    assert d <= 0.2


def test_params_regimes():
    with pytest.raises(RegimeError):
        EnsembleParams(4, 2, 3, 0.1)
    with pytest.raises(RegimeError):
        EnsembleParams(5, 2, 4, 0.1, case=Case.TILTED)
    with pytest.raises(RegimeError):
        EnsembleParams(4, 2, 2, 0.0)
    assert EnsembleParams(4, 4, 2, 0.1, case="tilted").output_dim == 8


def test_generate_is_deterministic():
    p = EnsembleParams(4, 2, 2, 0.1, M=3, seed=42)
    a, b = generate_ensemble(p), generate_ensemble(p)
    for x, y in zip(a.isometries, b.isometries):
        np.testing.assert_array_equal(x.matrix, y.matrix)
    assert a.metadata["theta"] == angle_for(0.1)


def test_equal_ensemble_all_pairs_within_2eps():
    ens = generate_ensemble(EnsembleParams(4, 2, 2, 0.1, M=10, seed=1))
    dists = [isometry_distance(a, b) for i, a in enumerate(ens.isometries) for b in ens.isometries[i + 1:]]
    assert len(dists) == 45 and max(dists) <= 0.2 + 1e-12


def test_tilted_choi_rank_at_most_r():
    ens = generate_ensemble(EnsembleParams(4, 4, 2, 0.1, M=10, seed=2, case=Case.TILTED))
    for v in ens.isometries:
        assert choi_rank(choi_matrix(v.matrix, v.d_A, v.d_B, v.d_E)) <= 2


def test_certify_examples():
    ens = generate_ensemble(EnsembleParams(4, 2, 2, 0.1, M=20, seed=1))
    rep = certify_ensemble(ens, sep_threshold=0.01)
    assert rep.passed and len(rep.pairs) == 190 and rep.max_closeness <= 0.2
    single = generate_ensemble(EnsembleParams(4, 2, 2, 0.1, M=1))
    assert certify_ensemble(single).passed and certify_ensemble(single).pairs == []
    dup = [ens.isometries[0], ens.isometries[0]]
    rep = certify_ensemble(dup, sep_threshold=0.01, eta=0.2)
    assert not rep.passed and rep.pairs[0].choi_dist == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("case, dims", [("equal", (4, 2, 2)), ("equal", (6, 3, 2)), ("tilted", (4, 4, 2))])
def test_choi_rank_is_generically_r(case, dims):
    rep = certify_ensemble(generate_ensemble(EnsembleParams(*dims, 0.1, M=5, seed=3, case=Case(case))))
    assert rep.choi_ranks == [dims[2]] * 5


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), eps=st.floats(0.01, 0.99),
       dims=st.sampled_from([(2, 1, 2), (4, 2, 2), (6, 3, 2), (3, 1, 3)]))
def test_equal_case_isometries_property(seed, eps, dims):
    ens = generate_ensemble(EnsembleParams(*dims, eps, M=3, seed=seed))
    for i, v in enumerate(ens.isometries):
        assert isometry_residual(v.matrix) <= 1e-10
        for w in ens.isometries[i + 1:]:
            assert isometry_distance(v, w) <= 2 * eps + 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), eps=st.floats(0.01, 0.99),
       dims=st.sampled_from([(4, 4, 2), (2, 4, 2), (4, 2, 4), (3, 2, 3), (5, 2, 5)]))
def test_tilted_isometries_property(seed, eps, dims):
    ens = generate_ensemble(EnsembleParams(*dims, eps, M=3, seed=seed, case=Case.TILTED))
    for i, v in enumerate(ens.isometries):
        assert isometry_residual(v.matrix) <= 1e-10
        for w in ens.isometries[i + 1:]:
            assert isometry_distance(v, w) <= 2 * eps + 1e-12
