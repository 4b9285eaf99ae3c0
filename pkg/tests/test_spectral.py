import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barronlab.gridio import load, save_grid, save_spectrum
from barronlab.special import bump_density
from barronlab.spectral import (
    Ball, Box, GridFunction, InvalidInputError, Polytope, ResolutionError, SpectrumGrid, bounded_set_from_dict,
    forward_ft, forward_ft_at, gradient_grid, inverse_ft, plancherel_residual, radial_ft, support_norm,
)


def gauss1d(resolution=2048, half_width=10.0, shift=0.0):
    return GridFunction.from_function(lambda p: np.exp(-(p[..., 0] - shift) ** 2 / 2), [0.0], half_width, resolution)


@pytest.fixture(scope="module")
def g1():
    return gauss1d()


@pytest.fixture(scope="module")
def s1(g1):
    return forward_ft(g1, 10.0, 201)


# -- GridFunction / SpectrumGrid ---------------------------------------------------------------

def test_grid_invariants():
    with pytest.raises(InvalidInputError):
        GridFunction([0.0], [0.0], np.zeros(8))
    with pytest.raises(InvalidInputError):
        GridFunction([0.0], [1.0], np.array([0.0, np.nan, 0.0, 0.0]))
    with pytest.raises(InvalidInputError):
        GridFunction([0.0, 0.0], [1.0, 1.0], np.zeros((4, 5)))
    f = GridFunction.from_function(lambda p: p[..., 0], [0.0, 0.0], 1.0, 8)
    assert f.values.size == 8**2
    assert f.cell_volume == pytest.approx(0.25**2)


def test_spectrum_cell_volume_is_product_of_spacings(s1):
    assert s1.cell_volume == pytest.approx(np.prod([a[1] - a[0] for a in s1.axes]))
    assert np.max(np.abs(s1.nodes())) <= s1.cutoff


# -- forward_ft ---------------------------------------------------------------------------------

def test_zero_function_has_zero_spectrum():
    z = GridFunction([0.0], [1.0], np.zeros(64))
    assert np.all(forward_ft(z, 10.0, 33).amplitudes == 0)


def test_gaussian_pair(s1):
    w = s1.axes[0]
    exact = np.exp(-w**2 / 2) / math.sqrt(2 * math.pi)
    assert np.max(np.abs(s1.amplitudes - exact)) <= 1e-6


def test_translation_is_a_phase(s1):
    x0 = 1.3
    st_ = forward_ft(gauss1d(shift=x0), 10.0, 201)
    assert np.allclose(np.abs(st_.amplitudes), np.abs(s1.amplitudes), atol=1e-9)
    w = s1.axes[0]
    assert np.allclose(st_.amplitudes, s1.amplitudes * np.exp(-1j * w * x0), atol=1e-9)


def test_linearity_exact():
    f = gauss1d(256)
    g = GridFunction.from_function(lambda p: np.exp(-p[..., 0] ** 4), [0.0], 10.0, 256)
    a, b = 2.5, -0.7
    lhs = forward_ft(a * f + b * g, 20.0, 41).amplitudes
    rhs = a * forward_ft(f, 20.0, 41).amplitudes + b * forward_ft(g, 20.0, 41).amplitudes
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-16)


def test_aliasing_guard():
    f = gauss1d(64)
    with pytest.raises(ResolutionError):
        forward_ft(f, math.pi / f.spacing[0] * 1.01, 33)


def test_nonfinite_input_rejected():
    with pytest.raises(InvalidInputError):
        GridFunction([0.0], [1.0], np.array([0.0, np.inf, 0.0, 0.0]))


def test_fft_agrees_with_direct():
    # half-width pi puts unit-spaced frequencies on DFT bins
    f = GridFunction.from_function(lambda p: np.exp(-np.sum(p**2, -1)), [0.0, 0.0], math.pi, 64)
    a = forward_ft(f, 10.0, 21, method="fft").amplitudes
    b = forward_ft(f, 10.0, 21, method="direct").amplitudes
    assert np.max(np.abs(a - b)) <= 1e-10


def test_forward_ft_at_matches_grid(s1, g1):
    w = s1.axes[0][::20]
    assert np.allclose(forward_ft_at(g1, w[:, None]), s1.amplitudes[::20], atol=1e-14)


# -- inverse_ft ---------------------------------------------------------------------------------

def test_round_trip(g1):
    s = forward_ft(g1, 10.0, 401)
    back, imag = inverse_ft(s, g1.center, g1.half_width, 256)
    x = back.axes()[0]
    assert np.max(np.abs(back.values - np.exp(-x**2 / 2))) <= 1e-4
    assert imag <= 1e-6


def test_zero_spectrum_inverts_to_zero():
    s = SpectrumGrid((np.linspace(-5, 5, 11),), np.zeros(11), 5.0)
    back, _ = inverse_ft(s, [0.0], [2.0], 16)
    assert np.all(back.values == 0)


def test_single_node_inverse_is_cosine():
    w0, A, cut = 1.5, 0.8, 2.0
    s = SpectrumGrid((np.array([w0]),), np.array([A + 0j]), cut)
    back, _ = inverse_ft(s, [0.0], [3.0], 32)
    x = back.axes()[0]
    assert np.allclose(back.values, A * s.cell_volume * np.cos(w0 * x), atol=1e-14)


# -- plancherel ---------------------------------------------------------------------------------

def test_plancherel_gaussian(g1, s1):
    assert plancherel_residual(g1, forward_ft(g1, 12.0, 481)) < 1e-4


def test_plancherel_zero():
    z = GridFunction([0.0], [1.0], np.zeros(16))
    assert plancherel_residual(z, forward_ft(z, 5.0, 11)) == 0.0


def test_plancherel_flags_undersampled_chirp():
    f = GridFunction.from_function(lambda p: np.cos(40.0 * p[..., 0]), [0.0], 5.0, 512)
    assert plancherel_residual(f, forward_ft(f, 10.0, 201)) > 0.1


# -- support_norm -------------------------------------------------------------------------------

def test_support_norm_examples():
    assert support_norm(Ball(1.0, 2), [3.0, 4.0]) == pytest.approx(5.0)
    assert support_norm(Ball(2.0, 2), [3.0, 4.0]) == pytest.approx(10.0)
    for B in (Ball(1.5, 2), Box((1.0, 2.0)), Polytope([[1.0, 0.0], [0.0, 2.0], [-1.0, -1.0]])):
        assert support_norm(B, [0.0, 0.0]) == 0.0


def test_box_and_polytope_formulas():
    assert support_norm(Box((1.0, 2.0)), [3.0, -1.0]) == pytest.approx(5.0)
    assert support_norm(Polytope([[1.0, 0.0], [0.0, 2.0]]), [3.0, -1.0]) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        Box((1.0, 1.0), center=(0.5, 0.0))
    with pytest.raises(ValueError):
        support_norm(Ball(1.0, 3), [1.0, 2.0])


def test_bounded_set_round_trip():
    for B in (Ball(1.5, 3), Box((1.0, 2.0)), Polytope([[1.0, 0.0], [0.0, 2.0]])):
        assert bounded_set_from_dict(B.to_dict()) == B


vec3 = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)
sets3 = st.sampled_from([Ball(0.7, 3), Box((1.0, 0.5, 2.0)), Polytope([[1, 0, 0], [0, 2, 1], [-1, 1, 3]])])


@given(sets3, vec3, vec3, st.floats(-100, 100))
def test_support_norm_is_a_seminorm(B, u, v, t):
    u, v = np.array(u), np.array(v)
    assert support_norm(B, t * u) == pytest.approx(abs(t) * support_norm(B, u), rel=1e-9, abs=1e-9)
    assert support_norm(B, u + v) <= support_norm(B, u) + support_norm(B, v) + 1e-9 * (1 + np.abs(u).sum()
                                                                                      + np.abs(v).sum())


# -- gradient_grid ------------------------------------------------------------------------------

def test_gradient_of_linear_and_constant():
    a = np.array([0.3, -1.2])
    f = GridFunction.from_function(lambda p: p @ a, [0.0, 0.0], 1.0, 16)
    for comp, ai in zip(gradient_grid(f), a):
        assert np.allclose(comp.values[1:-1, 1:-1], ai, atol=1e-12)
    c = GridFunction([0.0, 0.0], [1.0, 1.0], np.full((8, 8), 2.0))
    assert all(np.all(g.values == 0) for g in gradient_grid(c))


def _derivative_identity_error(N):
    f = gauss1d(N, 8.0)
    (df,) = gradient_grid(f)
    s, sd = forward_ft(f, 6.0, 61), forward_ft(df, 6.0, 61)
    return float(np.max(np.abs(sd.amplitudes - 1j * s.axes[0] * s.amplitudes)))


def test_derivative_identity_and_refinement():
    e1, e2 = _derivative_identity_error(256), _derivative_identity_error(512)
    assert e2 <= 1e-3
    assert e2 < e1


# -- radial_ft ----------------------------------------------------------------------------------

def test_radial_gaussian_matches_closed_form():
    from barronlab.special import RadialProfile
    prof = RadialProfile(lambda r: np.exp(-np.asarray(r) ** 2 / 2), (0.0, 12.0))
    rho = np.linspace(0.1, 5.0, 12)
    for n in (2, 3, 5):
        exact = (2 * math.pi) ** (-n / 2) * np.exp(-rho**2 / 2)
        assert np.allclose(radial_ft(prof, n, rho), exact, atol=1e-12)


def test_radial_zero_and_linearity():
    from barronlab.special import RadialProfile
    zero = RadialProfile(lambda r: np.zeros_like(np.asarray(r, dtype=float)), (0.0, 1.0))
    assert np.all(radial_ft(zero, 3, [0.5, 2.0]) == 0)
    b = bump_density(4, 0.5, 2.0)
    scaled = RadialProfile(lambda r: 3.0 * b(r), b.support, b.knots)
    rho = np.array([0.5, 1.7, 4.0])
    assert np.allclose(radial_ft(scaled, 3, rho), 3.0 * radial_ft(b, 3, rho), rtol=1e-12, atol=1e-16)


def test_radial_matches_three_dimensional_grid():
    prof = bump_density(4, 0.5, 2.0)
    G = GridFunction.from_function(lambda x: prof(np.linalg.norm(x, axis=-1)), np.zeros(3), 2.6, 96)
    rng = np.random.default_rng(5)
    rho = np.sort(rng.uniform(0.2, 8.0, 8))
    d = rng.normal(size=(8, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    grid = forward_ft_at(G, d * rho[:, None]).real
    rad = radial_ft(prof, 3, rho)
    assert np.max(np.abs(grid - rad) / np.abs(rad)) <= 1e-3


def test_radial_refinement_tightens_agreement():
    prof = bump_density(4, 0.5, 2.0)
    rho = np.array([1.1, 3.3])
    d = np.array([[0.0, 0.0, 1.0], [0.6, 0.8, 0.0]])
    errs = []
    for N in (48, 96):
        G = GridFunction.from_function(lambda x: prof(np.linalg.norm(x, axis=-1)), np.zeros(3), 2.6, N)
        errs.append(np.max(np.abs(forward_ft_at(G, d * rho[:, None]).real - radial_ft(prof, 3, rho))))
    assert errs[1] < errs[0]


# -- serialization ------------------------------------------------------------------------------

def test_grid_and_spectrum_files_round_trip(tmp_path, g1, s1):
    save_grid(g1, tmp_path / "g.json")
    save_spectrum(s1, tmp_path / "s.json")
    g2, s2 = load(tmp_path / "g.json"), load(tmp_path / "s.json")
    assert np.array_equal(g2.values, g1.values) and np.array_equal(g2.half_width, g1.half_width)
    assert np.array_equal(s2.amplitudes, s1.amplitudes) and s2.cutoff == s1.cutoff
    assert all(np.array_equal(a, b) for a, b in zip(s2.axes, s1.axes))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_real_function_has_hermitian_spectrum(sigma, shift):
    f = GridFunction.from_function(lambda p: np.exp(-(p[..., 0] - shift) ** 2 / (2 * sigma**2)), [0.0], 12.0, 256)
    a = forward_ft(f, 4.0, 17).amplitudes
    assert np.allclose(a, np.conj(a[::-1]), rtol=0, atol=1e-15)
