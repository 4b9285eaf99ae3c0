import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special as sp

from barronlab.special import (
    BesselEval, DomainError, bessel_j, bessel_j_array, bump_density, gamma, krasikov_terms, plateau,
    scan_cos_interval, smooth_step,
)


# -- Bessel -------------------------------------------------------------------------------------

def test_values_at_zero():
    assert bessel_j(0, 0).value == 1.0
    for a in (0.5, 1, 2.5, 7):
        assert bessel_j(a, 0).value == 0.0


def test_j0_at_one():
    assert bessel_j(0, 1).value == pytest.approx(0.7651976866, abs=1e-9)


def test_series_matches_krasikov_at_x10():
    s = bessel_j(1, 10, method="series")
    k = bessel_j(1, 10, method="krasikov")
    assert k.method == "krasikov" and k.error_bound == pytest.approx(10**-1.5)
    assert abs(s.value - k.value) <= 10**-1.5


def test_auto_switchover():
    assert bessel_j(1.5, 19.0).method != "krasikov"
    assert bessel_j(1.0, 19.0).method == "series"
    assert bessel_j(1.5, 20.0).method == "krasikov"
    assert bessel_j(6.0, 11.0).method == "series"


def test_besseleval_invariants():
    with pytest.raises(ValueError):
        BesselEval(0.7, 5.0, 0.0, "krasikov", 0.1)
    with pytest.raises(ValueError):
        BesselEval(1.0, 1.0, 0.0, "krasikov", 1.0)
    with pytest.raises(ValueError):
        BesselEval(1.0, 3.0, 0.0, "series", -1.0)
    with pytest.raises(DomainError):
        bessel_j(-1.0, 1.0)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 1.5, 2.7, 5.5, 10.0])
def test_accurate_against_scipy(alpha):
    x = np.concatenate([np.linspace(0, 10, 41), np.linspace(10.5, 200, 60)])
    v, b = bessel_j_array(alpha, x)
    ref = sp.jv(alpha, x)
    assert np.all(np.abs(v - ref) <= np.maximum(b, 1e-13) + 1e-13)
    assert np.max(np.abs(v - ref)) <= 1e-9


def test_series_and_krasikov_agree_on_lattice():
    rng = np.random.default_rng(0)
    for d in range(2, 13):
        x = rng.uniform(d, 50 * d, 50)
        series = np.array([bessel_j(d / 2, xi, method="series").value for xi in x])
        kras = np.array([bessel_j(d / 2, xi, method="krasikov").value for xi in x])
        assert np.all(np.abs(series - kras) <= x**-1.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0.0, 60.0))
def test_bessel_is_one_lipschitz_beyond_3alpha(alpha, offset):
    x = 3 * alpha + offset + np.linspace(0, 1, 201)
    v, _ = bessel_j_array(alpha, x)
    assert np.max(np.abs(np.diff(v) / np.diff(x))) <= 1 + 1e-6


def test_gamma_lanczos():
    for z in (0.5, 1.0, 2.5, 7.25, 30.0):
        assert gamma(z) == pytest.approx(math.gamma(z), rel=1e-12)


# -- Krasikov terms -----------------------------------------------------------------------------

def test_krasikov_terms_examples():
    c, f = krasikov_terms(2, 2.0)
    assert c == pytest.approx(math.sqrt(1 - 3 / 16))
    assert c == pytest.approx(0.90139, abs=1e-5)
    for d in (2, 5, 11):
        c, f = krasikov_terms(d, 1e6 * d)
        assert abs(c - 1) <= 1e-6 and abs(f - 1) <= 1e-6
    with pytest.raises(DomainError):
        krasikov_terms(3, 2.9)


def test_krasikov_brackets_on_lattice():
    for d in range(2, 16):
        x = d * np.geomspace(1, 1000, 60)
        c, f = krasikov_terms(d, x)
        assert np.all((0.85 <= c) & (c <= 1)) and np.all((0.85 <= f) & (f <= 1.3))
        assert np.all(c >= 1 - 0.15 * d / x - 1e-15)
        assert np.all(f <= 1 + 0.3 * d / x + 1e-15)


# -- test functions -----------------------------------------------------------------------------

@pytest.mark.parametrize("m", range(2, 9))
@pytest.mark.parametrize("K", [0.5, 1.0, 10.0])
def test_density_unit_mass(m, K):
    g = bump_density(m, K)
    total, _ = integrate.quad(g, 0, K, epsabs=1e-13, epsrel=1e-13)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_density_shape():
    g = bump_density(3, 2.0)
    assert g(0.0) == 0 and g(2.0) == 0 and g(-0.1) == 0 and g(2.1) == 0
    x = np.linspace(0, 1, 51)
    assert np.allclose(g(x), g(2.0 - x), atol=1e-15)
    assert np.all(g(np.linspace(-1, 3, 401)) >= 0)


@pytest.mark.parametrize("m", range(2, 12))
def test_normalizer_range_and_beta_oracle(m):
    C = bump_density(m, 1.0).normalizer
    assert 1 <= C <= 2 * math.e * math.sqrt(m)
    assert C == pytest.approx(1.0 / (4 ** (m + 1) * sp.beta(m + 2, m + 2)), rel=1e-12)


def test_derivative_bounds_reported():
    b = bump_density(2, 1.0).derivative_bounds()
    assert b.shape == (3,) and np.all(b > 0)


def test_smooth_step():
    G = smooth_step(3)
    assert G(-1.0) == 0 and G(2.0) == 1
    assert G(0.5) == pytest.approx(0.5, abs=1e-14)
    v = G(np.linspace(-0.5, 1.5, 1000))
    assert np.all(np.diff(v) >= 0)


def test_plateau_values():
    K = 1.7
    b = plateau(3, K)
    assert b(0.0) == 1 and b(2.5 * K) == 0 and b(-2.5 * K) == 0
    assert b(K) == 1 and b(-K) == 1


def test_plateau_continuity_at_knots():
    K = 0.8
    b = plateau(4, K)
    h = 1e-9
    for k in (-2 * K, -K, K, 2 * K):
        for nu in range(4):
            assert abs(b(k - h, nu) - b(k + h, nu)) <= 1e-6 * (2 * 4 / K) ** (nu + 1)


def test_plateau_derivative_scaling():
    # finite differences vs exact derivatives; constant c fitted at K=1 and reused
    m = 3
    x1 = np.linspace(-2.2, 2.2, 4401)
    c = max(np.max(np.abs(plateau(m, 1.0)(x1, k))) / (2 * m) ** k for k in range(m + 1))
    for K in (0.5, 2.0, 5.0):
        b = plateau(m, K)
        x = np.linspace(-2.2 * K, 2.2 * K, 4401)
        for k in range(1, m + 1):
            fd = np.gradient(b(x, k - 1), x)
            assert np.allclose(fd, b(x, k), atol=2e-2 * (2 * m / K) ** k)
            assert np.max(np.abs(b(x, k))) <= c * (2 * m / K) ** k * (1 + 1e-9)


def test_plateau_preserves_profiles_inside():
    f = bump_density(4, 1.5, 0.3)
    r = np.linspace(0, 2, 501)
    for Kp in (1.8, 3.0):
        assert np.array_equal(plateau(3, Kp)(r) * f(r), f(r))


# -- cosine interval scan -----------------------------------------------------------------------

@pytest.mark.parametrize("n,K3", [(3, 4.0), (3, 16.0), (7, 8.0), (11, 4.0)])
def test_scan_cos_interval(n, K3):
    start = 17.0 * math.sqrt(n)
    K1, eps = scan_cos_interval(n, K3, start)
    assert K1 >= start
    assert eps >= math.pi / (2 * K3)
    assert K1 + eps <= start + 4 * math.pi / (K3 * math.sqrt(0.75)) + math.pi / K3
    r = np.linspace(K1, K1 + eps, 1000)
    _, f = krasikov_terms(n, K3 * r)
    assert np.all(np.cos(-(n + 1) * math.pi / 4 + f * K3 * r) >= 1 / math.sqrt(2) - 1e-12)
    assert scan_cos_interval(n, K3, start) == (K1, eps)


def test_scan_cos_rejects_bad_dimension():
    with pytest.raises(ValueError):
        scan_cos_interval(5, 4.0, 30.0)
