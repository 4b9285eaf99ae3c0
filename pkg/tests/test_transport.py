import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barronlab.transport import (
    EXACT_BUDGET, BudgetError, Coupling, EmpiricalMeasure, InvalidLipschitzError, InvalidMeasureError,
    coupling_from_map, enumerate_vertex_couplings, kr_dual_lower, lipschitz_discrepancy, mmd_discrepancy,
    random_measure, read_measure_csv, read_measure_json, renormalize, ridge, wasserstein_bruteforce,
    wasserstein_exact, wasserstein_sinkhorn, write_measure_csv,
)

d0 = EmpiricalMeasure.dirac([0.0])
d1 = EmpiricalMeasure.dirac([1.0])
two = EmpiricalMeasure([[1.0], [2.0]], [0.5, 0.5])


# -- measures -----------------------------------------------------------------------------------

def test_measure_validation():
    with pytest.raises(InvalidMeasureError):
        EmpiricalMeasure([[0.0]], [-1.0])
    with pytest.raises(InvalidMeasureError):
        EmpiricalMeasure([[np.nan]], [1.0])
    with pytest.raises(InvalidMeasureError):
        EmpiricalMeasure([[0.0], [1.0]], [1.0])
    with pytest.raises(InvalidMeasureError):
        wasserstein_exact(EmpiricalMeasure([[0.0]], [0.5]), d1, 1)


def test_renormalize_reports_excluded_mass():
    mu, gone = renormalize(EmpiricalMeasure([[0.0], [2.0]], [0.3, 0.5]))
    assert gone == pytest.approx(0.2)
    assert mu.mass == pytest.approx(1.0)
    assert np.allclose(mu.weights, [0.375, 0.625])


def test_csv_and_json_round_trip(tmp_path):
    mu = random_measure(np.random.default_rng(0), 7, 3)
    write_measure_csv(mu, tmp_path / "m.csv")
    back = read_measure_csv(tmp_path / "m.csv")
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.weights, mu.weights)
    (tmp_path / "m.json").write_text(json.dumps(mu.to_dict()))
    back = read_measure_json(tmp_path / "m.json")
    assert np.array_equal(back.points, mu.points)


def test_csv_without_header(tmp_path):
    (tmp_path / "m.csv").write_text("0.25,1,2\n0.75,3,4\n")
    mu = read_measure_csv(tmp_path / "m.csv")
    assert mu.dim == 2 and np.allclose(mu.weights, [0.25, 0.75])


# -- exact solver -------------------------------------------------------------------------------

def test_exact_examples():
    for p in (1, 2):
        assert wasserstein_exact(d0, d1, p)[0] == pytest.approx(1.0)
    w1, G = wasserstein_exact(d0, two, 1)
    w2, _ = wasserstein_exact(d0, two, 2)
    assert w1 == pytest.approx(1.5, abs=1e-12) and w2 == pytest.approx(math.sqrt(2.5), abs=1e-12)
    assert np.allclose(G.matrix, [[0.5, 0.5]])


def test_identical_measures_have_diagonal_coupling():
    mu = random_measure(np.random.default_rng(1), 6, 2, uniform=True)
    val, G = wasserstein_exact(mu, mu, 2)
    assert val <= 1e-12
    assert np.allclose(G.matrix, np.diag(mu.weights), atol=1e-12)
    mu = random_measure(np.random.default_rng(2), 5, 2)
    val, G = wasserstein_exact(mu, mu, 1)
    assert val <= 1e-12 and np.allclose(G.matrix, np.diag(mu.weights), atol=1e-12)


def test_budget_enforced():
    big = EmpiricalMeasure.uniform(np.zeros((EXACT_BUDGET, 1)))
    with pytest.raises(BudgetError):
        wasserstein_exact(big, d0, 1)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        wasserstein_exact(d0, EmpiricalMeasure.dirac([0.0, 0.0]), 1)


def test_bruteforce_agreement():
    rng = np.random.default_rng(3)
    for _ in range(40):
        mu = random_measure(rng, int(rng.integers(1, 4)), 2)
        nu = random_measure(rng, int(rng.integers(1, 4)), 2)
        for p in (1, 2):
            exact, G = wasserstein_exact(mu, nu, p)
            assert exact == pytest.approx(wasserstein_bruteforce(mu, nu, p), abs=1e-9)
            G.validate(mu, nu)


def test_vertex_enumeration_contains_feasible_couplings():
    a, b = np.array([0.2, 0.8]), np.array([0.5, 0.3, 0.2])
    verts = enumerate_vertex_couplings(a, b)
    assert verts
    for V in verts:
        assert np.allclose(V.sum(axis=1), a) and np.allclose(V.sum(axis=0), b) and np.all(V >= -1e-15)


def test_coupling_validation():
    with pytest.raises(InvalidMeasureError):
        Coupling(np.array([[0.5, 0.4]])).validate(d0, two)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_measure(rng, int(rng.integers(1, 8)), 2) for _ in range(3))
    for p in (1, 2):
        ab, G = wasserstein_exact(a, b, p)
        ba, _ = wasserstein_exact(b, a, p)
        bc, _ = wasserstein_exact(b, c, p)
        ac, _ = wasserstein_exact(a, c, p)
        assert ab == pytest.approx(ba, abs=1e-9)
        assert ac <= ab + bc + 1e-9
        G.validate(a, b)
    assert wasserstein_exact(a, b, 1)[0] <= wasserstein_exact(a, b, 2)[0] + 1e-9


def test_large_uniform_instance_uses_assignment():
    rng = np.random.default_rng(4)
    mu = random_measure(rng, 200, 2, uniform=True)
    nu = random_measure(rng, 200, 2, uniform=True, shift=1.0)
    val, G = wasserstein_exact(mu, nu, 2)
    G.validate(mu, nu)
    assert np.count_nonzero(G.matrix > 1e-12) == 200


# -- sinkhorn -----------------------------------------------------------------------------------

def test_sinkhorn_identical_measures():
    mu = random_measure(np.random.default_rng(5), 6, 2, uniform=True)
    for reg in (1e-1, 1e-2):
        res = wasserstein_sinkhorn(mu, mu, 1, reg)
        assert res.value <= reg * math.log(mu.size) + 1e-6
        assert res.label == "approximate"


def test_sinkhorn_three_point_example():
    exact, _ = wasserstein_exact(d0, two, 2)
    errs = [abs(wasserstein_sinkhorn(d0, two, 2, reg).value - exact) for reg in (1.0, 0.1, 0.01, 0.001)]
    assert errs[-1] <= 0.01 * exact
    # the coupling is forced here, so every error sits at rounding level
    assert max(errs) <= 1e-12


def test_sinkhorn_bias_decreases_with_regularization():
    mu = EmpiricalMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = EmpiricalMeasure([[0.1], [1.3]], [0.5, 0.5])
    exact, _ = wasserstein_exact(mu, nu, 2)
    errs = [abs(wasserstein_sinkhorn(mu, nu, 2, reg).value - exact) for reg in (1.0, 0.5, 0.25, 0.125)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_sinkhorn_reports_non_convergence():
    mu = EmpiricalMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = EmpiricalMeasure([[0.1], [1.3]], [0.5, 0.5])
    res = wasserstein_sinkhorn(mu, nu, 2, 1.0, max_iter=3)
    assert not res.converged and res.iterations == 3 and math.isfinite(res.value)
    with pytest.raises(ValueError):
        wasserstein_sinkhorn(mu, nu, 2, 0.0)


# -- map couplings and dual bounds --------------------------------------------------------------

def test_coupling_from_map():
    X = np.random.default_rng(6).normal(size=(100, 2))
    v = np.array([0.3, -0.4])
    assert coupling_from_map(X, lambda Z: Z, lambda Z: Z) == 0
    assert coupling_from_map(X, lambda Z: Z, lambda Z: Z + v) == pytest.approx(0.5, rel=1e-14)


def test_coupling_from_map_dominates_exact():
    rng = np.random.default_rng(7)
    for _ in range(10):
        X = rng.normal(size=(30, 2))
        A = rng.normal(size=(2, 2))
        f, g = (lambda Z: np.tanh(Z)), (lambda Z: Z @ A.T)
        exact, _ = wasserstein_exact(EmpiricalMeasure.uniform(f(X)), EmpiricalMeasure.uniform(g(X)), 2)
        assert exact <= coupling_from_map(X, f, g) + 1e-12


def test_lipschitz_discrepancy_examples():
    disc, bound = lipschitz_discrepancy(lambda X: np.full(len(X), 2.0), 1.0, d0, d1)
    assert disc == 0
    disc, bound = lipschitz_discrepancy(lambda X: np.atleast_2d(X)[:, 0], 1.0, d0, d1)
    assert disc == pytest.approx(1.0) and bound == pytest.approx(1.0)
    with pytest.raises(InvalidLipschitzError):
        lipschitz_discrepancy(lambda X: 3 * np.atleast_2d(X)[:, 0], 1.0, d0, d1)


def test_lipschitz_discrepancy_random_trials():
    rng = np.random.default_rng(8)
    for _ in range(100):
        mu = random_measure(rng, 12, 3)
        nu = random_measure(rng, 9, 3, shift=rng.normal(size=3))
        phi = ridge(rng.normal(size=3), rng.normal(), kind=str(rng.choice(["abs", "identity", "tanh"])))
        disc, bound = lipschitz_discrepancy(phi, 1.0, mu, nu)
        assert disc <= bound + 1e-9


def test_kr_dual_lower():
    assert kr_dual_lower(d0, d1, [lambda X: np.zeros(len(X))]) == 0
    assert kr_dual_lower(d1, d0, [lambda X: np.atleast_2d(X)[:, 0]]) == pytest.approx(1.0)
    rng = np.random.default_rng(9)
    for _ in range(20):
        mu, nu = random_measure(rng, 6, 2), random_measure(rng, 5, 2, shift=0.5)
        cands = [ridge(rng.normal(size=2), rng.normal()) for _ in range(10)]
        assert kr_dual_lower(mu, nu, cands) <= wasserstein_exact(mu, nu, 1)[0] + 1e-9


def test_mmd_discrepancy():
    mu = random_measure(np.random.default_rng(10), 4, 2)
    F = [ridge([1.0, 0.0]), ridge([0.0, 1.0], kind="tanh")]
    assert mmd_discrepancy(F, mu, mu) == 0
    a, b = random_measure(np.random.default_rng(11), 5, 2), random_measure(np.random.default_rng(12), 5, 2)
    assert mmd_discrepancy(F, a, b) == pytest.approx(max(kr_dual_lower(a, b, F), kr_dual_lower(b, a, F)))


def test_steep_sigmoid_separates_nearby_diracs():
    x0, x1 = EmpiricalMeasure.dirac([0.0]), EmpiricalMeasure.dirac([0.01])
    steep = [lambda X, k=k: 1.0 / (1.0 + np.exp(-k * (np.atleast_2d(X)[:, 0] - 0.005))) for k in (1e3, 1e4)]
    assert mmd_discrepancy(steep, x0, x1) > 0.99
    assert wasserstein_exact(x0, x1, 1)[0] == pytest.approx(0.01)
