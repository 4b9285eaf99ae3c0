"""Numeric bounds on Barron constants and the calculus that combines them.

An upper estimate comes from a concrete extension ``F`` of ``f`` beyond ``B``:
``C_{f,B} <= int ||w||_B |F^(w)| dw``.  A lower estimate uses a localising
function ``g`` supported in ``rB``::

    C_{f,B} >= r * int ||((grad f) g)^|| / int |g^|

All estimates are plain floating-point quadratures; they carry the tail mass
of the truncated frequency grid as an honesty flag, not a certificate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .special import plateau
from .spectral import (
    Ball,
    BoundedSet,
    GridFunction,
    InvalidInputError,
    bounded_set_from_dict,
    forward_ft,
    radial_moment,
    support_norm,
)


class DegenerateError(ValueError):
    pass


class CombinationError(ValueError):
    pass


class UnreliableEstimateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BarronEstimate:
    direction: str
    value: float
    set: BoundedSet
    method: dict = field(default_factory=dict)
    tail_estimate: float = 0.0
    provenance: str = ""
    status: str = "ok"

    def __post_init__(self):
        if self.direction not in ("upper", "lower"):
            raise ValueError(f"direction must be 'upper' or 'lower', got {self.direction!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"estimate value must be finite and >= 0, got {self.value}")
        if not math.isfinite(self.tail_estimate) or self.tail_estimate < 0:
            raise ValueError("tail estimate must be finite and >= 0")

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "value": self.value,
            "set": self.set.to_dict(),
            "method": dict(self.method),
            "tailEstimate": self.tail_estimate,
            "provenance": self.provenance,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BarronEstimate":
        return cls(
            d["direction"],
            float(d["value"]),
            bounded_set_from_dict(d["set"]),
            dict(d.get("method", {})),
            float(d.get("tailEstimate", 0.0)),
            d.get("provenance", ""),
            d.get("status", "ok"),
        )


@dataclass(frozen=True)
class GammaPair:
    """``a`` bounds ``int |h^|``, ``c`` bounds ``int |w| |h^|``."""

    a: float
    c: float

    def __post_init__(self):
        for v in (self.a, self.c):
            if not math.isfinite(v) or v < 0:
                raise ValueError("GammaPair entries must be finite and >= 0")


def _flag_tail(value: float, tail: float) -> str:
    if value > 0 and tail > 0.1 * value:
        warnings.warn(
            f"tail mass {tail:.3g} exceeds 10% of the estimate {value:.3g}; raise the cutoff",
            UnreliableEstimateWarning,
            stacklevel=3,
        )
        return "unreliable"
    return "ok"


def upper_bound_from_extension(
    F: GridFunction, B: BoundedSet, cutoff: float, freq_resolution: int, recipe: str = "grid extension"
) -> BarronEstimate:
    """``sum_k ||w_k||_B |F^(w_k)| dw`` over the frequency grid."""
    if B.dim != F.dimension:
        raise InvalidInputError("set and extension live in different dimensions")
    s = forward_ft(F, cutoff, freq_resolution)
    weight = support_norm(B, s.nodes())
    dens = weight * np.abs(s.amplitudes) * s.cell_volume
    value = float(dens.sum())
    tail = float(dens[s.shell_mask()].sum())
    return BarronEstimate(
        "upper",
        value,
        B,
        {
            "tag": "extension-spectrum",
            "resolution": F.resolution,
            "cutoff": cutoff,
            "freqResolution": freq_resolution,
        },
        tail,
        recipe,
        _flag_tail(value, tail),
    )


def upper_bound_radial(profile, n: int, r: float, rho_max: float, rho_step: float | None = None,
                       recipe: str = "radial function as its own extension") -> BarronEstimate:
    """Upper estimate on ``rB_n`` for ``f(x) = f1(|x|)`` extended by itself.

    ``r * S_{n-1} int_0^rho_max rho^n |f^(rho)| d rho``; the tail estimate is
    the contribution of the last 5% of the rho range.
    """
    value, rho, fhat = radial_moment(profile, n, rho_max, power=1.0, rho_step=rho_step)
    sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    integrand = rho**n * np.abs(fhat)
    outer = rho >= 0.95 * rho_max
    tail = float(r * sphere * integrate.trapezoid(integrand[outer], rho[outer])) if outer.sum() > 1 else 0.0
    value *= r
    return BarronEstimate(
        "upper",
        float(value),
        Ball(r, n),
        {"tag": "radial-spectrum", "rhoMax": rho_max, "rhoNodes": len(rho)},
        tail,
        recipe,
        _flag_tail(value, tail),
    )


def lower_bound(
    gradF: Sequence[GridFunction], g: GridFunction, r: float, cutoff: float, freq_resolution: int
) -> BarronEstimate:
    """Localised-gradient lower bound with localiser ``g`` supported in ``ball(r)``."""
    if len(gradF) != g.dimension:
        raise InvalidInputError("need one gradient component per axis")
    pts = g.points()
    outside = np.linalg.norm(pts, axis=-1) > r * (1 + 1e-9)
    scale = max(float(np.max(np.abs(g.values))), 1e-300)
    if np.any(np.abs(g.values[outside]) > 1e-12 * scale):
        raise InvalidInputError(f"localiser is not supported in the ball of radius {r}")
    specs = [forward_ft(d * g, cutoff, freq_resolution) for d in gradF]
    sg = forward_ft(g, cutoff, freq_resolution)
    den = sg.integrate()
    if den < 1e-12:
        raise DegenerateError("localiser has (numerically) vanishing spectrum")
    mag = np.sqrt(sum(np.abs(s.amplitudes) ** 2 for s in specs))
    num = float(mag.sum() * sg.cell_volume)
    tail = float(mag[sg.shell_mask()].sum() * sg.cell_volume)
    value = r * num / den
    return BarronEstimate(
        "lower",
        value,
        Ball(r, g.dimension),
        {"tag": "localised-gradient", "resolution": g.resolution, "cutoff": cutoff,
         "freqResolution": freq_resolution, "numerator": num, "denominator": den},
        r * tail / den,
        "gradient times localiser",
    )


def l1_fourier_bound_1d(x, h, dh, d2h) -> GammaPair:
    """L1 bounds on ``h^`` and ``w h^`` from lattice samples of ``h, h', h''``.

    a = 2^(-1/2) (int h^2 + h'^2)^(1/2),  c = 2^(-1/2) (int h'^2 + h''^2)^(1/2),
    integrals by the trapezoid rule.
    """
    x = np.asarray(x, dtype=float)
    h, dh, d2h = (np.asarray(v, dtype=float) for v in (h, dh, d2h))
    if not (x.shape == h.shape == dh.shape == d2h.shape):
        raise InvalidInputError("samples must share the lattice")
    if x.size < 2:
        raise InvalidInputError("need at least two lattice points")
    a = math.sqrt(max(integrate.trapezoid(h**2 + dh**2, x), 0.0) / 2.0)
    c = math.sqrt(max(integrate.trapezoid(dh**2 + d2h**2, x), 0.0) / 2.0)
    return GammaPair(a, c)


def combine_subadditive(terms) -> BarronEstimate:
    """Upper estimate for ``sum beta_i f_i`` from upper estimates of each ``f_i``."""
    terms = list(terms)
    if not terms:
        raise CombinationError("nothing to combine")
    base = terms[0][1]
    for beta, est in terms:
        if est.direction != "upper":
            raise CombinationError("only upper estimates combine subadditively")
        if est.set != base.set:
            raise CombinationError("estimates refer to different sets")
    value = float(sum(abs(b) * e.value for b, e in terms))
    tail = float(sum(abs(b) * e.tail_estimate for b, e in terms))
    return BarronEstimate(
        "upper",
        value,
        base.set,
        {"tag": "subadditive", "terms": len(terms)},
        tail,
        "sum of |beta| times component bounds",
        "unreliable" if any(e.status != "ok" for _, e in terms) else "ok",
    )


def ridge_lift(h_est: BarronEstimate, a, n: int) -> BarronEstimate:
    """Bound for ``x -> h(<a, x>)`` on ``ball(r)`` in ``R^n`` from a bound for ``h`` on ``[-r, r]``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (n,):
        raise InvalidInputError("direction must have n entries")
    if abs(np.linalg.norm(a) - 1.0) > 1e-10:
        raise InvalidInputError("ridge direction must be a unit vector")
    if h_est.direction != "upper":
        raise CombinationError("ridge lifting applies to upper estimates")
    S = h_est.set
    if isinstance(S, Ball):
        r = S.radius
    elif S.dim == 1 and hasattr(S, "half_widths"):
        r = S.half_widths[0]
    else:
        raise InvalidInputError("ridge profile must be bounded on a 1-D interval")
    return BarronEstimate(
        "upper",
        h_est.value,
        Ball(r, n),
        {**h_est.method, "ridge": True},
        h_est.tail_estimate,
        h_est.provenance + " (ridge lift)",
        h_est.status,
    )


def power_rule(g: GammaPair, k: int) -> GammaPair:
    if k < 1:
        raise ValueError("power must be >= 1")
    return GammaPair(g.a**k, k * g.a ** (k - 1) * g.c)


def identity_extension(r: float, m: int = 2, points: int = 20001):
    """Extension ``h(x) = x b_(r)(x)`` of the identity on ``[-r, r]`` and its ``GammaPair``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    b = plateau(m, r)

    def h(x, nu: int = 0):
        x = np.asarray(x, dtype=float)
        if nu == 0:
            return x * b(x)
        # Leibniz rule for x * b
        return x * b(x, nu) + nu * b(x, nu - 1)

    x = np.linspace(-2.0 * r, 2.0 * r, points)
    return l1_fourier_bound_1d(x, h(x), h(x, 1), h(x, 2)), h


def square_norm_bound(n: int, r: float, m: int = 2) -> BarronEstimate:
    """Upper estimate for ``||x||^2`` on ``ball(r)`` in ``R^n``.

    Chain: identity extension, squared by the power rule, bounded on ``[-r, r]``
    as ``r * c``, lifted along each coordinate axis and summed.
    """
    if n < 0:
        raise ValueError("dimension must be >= 0")
    if r <= 0:
        raise ValueError("radius must be positive")
    pair, _ = identity_extension(r, m)
    sq = power_rule(pair, 2)
    one = BarronEstimate("upper", r * sq.c, Ball(r, 1), {"tag": "gamma-pair", "a": sq.a, "c": sq.c},
                         0.0, "squared identity extension")
    if n == 0:
        return BarronEstimate("upper", 0.0, Ball(r, 0), {"tag": "empty-sum"}, 0.0, "no coordinates")
    lifted = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        lifted.append((1.0, ridge_lift(one, e, n)))
    out = combine_subadditive(lifted)
    return BarronEstimate("upper", out.value, out.set, {"tag": "square-norm", "a": sq.a, "c": sq.c, "n": n},
                          0.0, "sum of squared coordinate extensions")


def fit_power_law(xs, ys) -> tuple[float, float, float]:
    """Least-squares ``log y = log c + p log x``; returns ``(c, p, r2)``."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    A = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(math.exp(coef[0])), float(coef[1]), r2


def weak_converse_diagnostic(weights, coeffs, diameter: float) -> float:
    """``diam(K) * sum |c_i| ||a_i||`` for a finite network; reported, never asserted."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    c = np.asarray(coeffs, dtype=float)
    return float(diameter * np.sum(np.abs(c) * np.linalg.norm(W, axis=1)))


def gaussian_l1_check(sigma: float = 1.0, half_width: float = 12.0, points: int = 8001):
    """``int |h^|`` by quadrature of the analytic spectrum vs the ``GammaPair`` bound for a Gaussian."""
    x = np.linspace(-half_width, half_width, points)
    h = np.exp(-x**2 / (2 * sigma**2))
    dh = -x / sigma**2 * h
    d2h = (x**2 / sigma**4 - 1 / sigma**2) * h
    pair = l1_fourier_bound_1d(x, h, dh, d2h)
    direct, _ = integrate.quad(lambda w: sigma / math.sqrt(2 * math.pi) * math.exp(-(sigma * w) ** 2 / 2),
                               -np.inf, np.inf)
    return direct, pair
