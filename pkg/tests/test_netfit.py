import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barronlab.netfit import (
    ACTIVATIONS, FitReport, InvalidMeasureError, OverfitWarning, TwoLayerNet, eval_net, eval_vector, fit_two_layer,
    loglog_slope, measure_transfer_probe, project_l1_ball, refit_coefficients, uniform_ball, vector_fit,
)

FAST = dict(restarts=16, refine=1)


@pytest.fixture(scope="module")
def disc():
    return uniform_ball(np.random.default_rng(1), 600, 2)


def test_constant_target(disc):
    net, rep = fit_two_layer(disc, np.full(len(disc), 3.0), C=1.0, k=1, seed=0, **FAST)
    assert rep.error == pytest.approx(0.0, abs=1e-20)
    assert net.offset == pytest.approx(3.0)


def test_realizable_target(disc):
    a, b = np.array([2.0, -1.0]), 0.3
    y = 1.0 / (1.0 + np.exp(-(disc @ a + b)))
    net, rep = fit_two_layer(disc, y, C=1.0, k=1, seed=4)
    assert rep.error < 1e-6
    assert net.l1() <= 2.0 + 1e-12


def test_budget_holds_and_report_fields(disc):
    y = np.sin(3 * disc[:, 0]) * 4.0
    net, rep = fit_two_layer(disc, y, C=0.25, k=6, seed=2, **FAST)
    assert net.l1() <= 0.5 * (1 + 1e-12)
    assert rep.budget_used == net.l1() and rep.target_bound == pytest.approx(0.25 / 6)
    assert rep.error >= 0 and len(rep.history) == 6


def test_greedy_error_is_monotone(disc):
    y = np.exp(-4 * np.sum(disc**2, axis=1))
    _, rep = fit_two_layer(disc, y, C=2.0, k=10, seed=7, **FAST)
    assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))
    assert rep.error <= rep.history[-1] * (1 + 1e-9) + 1e-15


def test_seeded_determinism(disc):
    y = np.cos(2 * disc[:, 1])
    n1, r1 = fit_two_layer(disc, y, C=1.0, k=4, seed=11, **FAST)
    n2, r2 = fit_two_layer(disc, y, C=1.0, k=4, seed=11, **FAST)
    assert n1 == n2 and r1.error == r2.error


def test_subprobability_weights_accepted(disc):
    w = np.full(len(disc), 0.5 / len(disc))
    _, rep = fit_two_layer(disc, disc[:, 0], w, C=1.0, k=2, seed=0, **FAST)
    assert rep.total_weight == pytest.approx(0.5)


def test_invalid_measures(disc):
    y = disc[:, 0]
    with pytest.raises(InvalidMeasureError):
        fit_two_layer(disc, y, np.zeros(len(disc)), k=1)
    with pytest.raises(InvalidMeasureError):
        fit_two_layer(disc, y, np.full(len(disc), 2.0 / len(disc)), k=1)
    with pytest.raises(InvalidMeasureError):
        fit_two_layer(disc, y, -np.ones(len(disc)) / len(disc), k=1)


def test_overfit_warning():
    X = uniform_ball(np.random.default_rng(0), 5, 3)
    with pytest.warns(OverfitWarning):
        fit_two_layer(X, X[:, 0], k=20, seed=0, restarts=4, refine=0)


# -- evaluation and activations -----------------------------------------------------------------

def test_zero_coefficients_give_offset():
    net = TwoLayerNet(np.ones((3, 2)), np.zeros(3), np.zeros(3), offset=-1.25)
    assert np.all(net(np.random.default_rng(0).normal(size=(7, 2))) == -1.25)
    assert eval_net(net, [0.3, 0.1]) == -1.25


def test_logistic_limits():
    a = np.array([0.6, 0.8])
    net = TwoLayerNet(a[None], [0.0], [2.5], offset=1.0)
    assert net(50 * a) == pytest.approx(3.5)
    assert net(-50 * a) == pytest.approx(1.0)


@pytest.mark.parametrize("name", sorted(ACTIVATIONS))
def test_activations_map_into_unit_interval(name):
    z = np.random.default_rng(3).normal(scale=10, size=10_000)
    out = ACTIVATIONS[name](z)
    assert np.all((out >= 0) & (out <= 1))


def test_relu_difference():
    z = np.array([-1.0, 0.0, 0.25, 1.0, 3.0])
    assert np.allclose(ACTIVATIONS["reluDifference"](z), [0, 0, 0.25, 1, 1])


def test_net_invariants():
    with pytest.raises(ValueError):
        TwoLayerNet(np.ones((2, 2)), np.zeros(2), np.ones(3))
    with pytest.raises(ValueError):
        TwoLayerNet(np.ones((1, 2)), [0.0], [3.0], budget=2.0)
    with pytest.raises(ValueError):
        TwoLayerNet(np.ones((1, 2)), [np.nan], [1.0])
    with pytest.raises(ValueError):
        TwoLayerNet(np.ones((1, 2)), [0.0], [1.0], activation="softsign")


def test_json_round_trip(disc):
    net, rep = fit_two_layer(disc, disc[:, 1] ** 2, C=1.0, k=3, seed=5, activation_name="scaledTanh", **FAST)
    net2 = TwoLayerNet.from_dict(json.loads(json.dumps(net.to_dict())))
    assert net2 == net
    assert np.array_equal(net2(disc), net(disc))
    assert FitReport.from_dict(json.loads(json.dumps(rep.to_dict()))) == rep


# -- projection and refit -----------------------------------------------------------------------

@settings(max_examples=60)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(0.0, 20.0))
def test_projection_lands_in_ball(v, z):
    p = project_l1_ball(np.array(v), z)
    assert np.abs(p).sum() <= z * (1 + 1e-12) + 1e-300
    if np.abs(v).sum() <= z:
        assert np.array_equal(p, v)


def test_projection_is_nearest_point():
    rng = np.random.default_rng(0)
    v = rng.normal(size=6) * 3
    p = project_l1_ball(v, 1.0)
    for _ in range(500):
        q = project_l1_ball(rng.normal(size=6), 1.0)
        assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-12


def test_refit_matches_unconstrained_least_squares():
    rng = np.random.default_rng(2)
    Phi = rng.uniform(size=(200, 4))
    y = Phi @ np.array([0.2, -0.1, 0.3, 0.05]) + 0.7
    w = np.full(200, 1 / 200)
    c, c0, err, _ = refit_coefficients(Phi, y, w, budget=10.0)
    assert err < 1e-20
    assert c0 == pytest.approx(0.7, abs=1e-9)


# -- vector fits --------------------------------------------------------------------------------

def test_vector_fit_single_output_matches_scalar(disc):
    y = np.sin(disc[:, 0])
    nets, reps, agg = vector_fit(disc, y, C=1.0, k=3, seed=9, **FAST)
    net, rep = fit_two_layer(disc, y, C=1.0, k=3, seed=9, **FAST)
    assert len(nets) == 1 and nets[0] == net
    assert agg == pytest.approx(math.sqrt(rep.error))


def test_vector_fit_identity():
    X = np.random.default_rng(0).uniform(-1, 1, size=(2000, 2))
    nets, reps, agg = vector_fit(X, X, C=4.0, k=32, seed=0)
    assert agg < 0.05
    assert np.sqrt(np.mean(np.sum((eval_vector(nets, X) - X) ** 2, axis=1))) == pytest.approx(agg, rel=1e-9)
    eps = 0.05
    assert all(r.error <= eps**2 / 2 for r in reps)


# -- diagnostics --------------------------------------------------------------------------------

def test_loglog_slope_of_power_law():
    ks = np.array([8, 16, 32, 64])
    assert loglog_slope(ks, 3.0 / ks) == pytest.approx(-1.0)


def test_measure_transfer_probe_reports_both(disc):
    net = TwoLayerNet(np.array([[1.0, 0.0]]), [0.0], [1.0])
    out = measure_transfer_probe(net, lambda X: np.zeros(len(X)), disc, None, 2 * disc, None)
    assert set(out) == {"mu1", "mu2"} and out["mu1"] != out["mu2"]


def test_uniform_ball_radius():
    X = uniform_ball(np.random.default_rng(0), 4000, 3, radius=2.0)
    assert np.all(np.linalg.norm(X, axis=1) <= 2.0)
    assert np.mean(np.linalg.norm(X, axis=1) <= 1.0) == pytest.approx(1 / 8, abs=0.02)
