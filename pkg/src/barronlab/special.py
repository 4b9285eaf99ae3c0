"""Bessel functions of the first kind and smooth compactly supported test functions.

Three evaluation routes are available for ``J_alpha(x)``:

``series``
    The ascending power series.  Summed in double precision for ``x <= 10``
    and in extended (decimal) precision above, where the alternating terms
    would otherwise cancel catastrophically.
``hankel``
    The Hankel asymptotic expansion, truncated at its smallest term.  For
    half-integer orders the expansion terminates and is exact.
``krasikov``
    The closed-form cosine approximation for ``J_{d/2}``, ``x >= d``, with
    certified error ``x**-1.5``.

The test functions are the polynomial bump ``g(t) ~ t^(m+1)(1-t)^(m+1)`` on
``[0, 1]``, its primitive ``G`` (a smooth step) and the plateau
``b(x) = G(2 - |x|)``.  All three carry exact derivatives of every order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize
from scipy import special as _scipy_special


class AccuracyError(ArithmeticError):
    """Raised when a Bessel value cannot be delivered at the requested accuracy."""

    def __init__(self, message, best_value=None, bound=None):
        super().__init__(message)
        self.best_value = best_value
        self.bound = bound


class DomainError(ValueError):
    """Argument outside the region where a formula is valid."""


class SearchError(RuntimeError):
    """A scan that is guaranteed to succeed came back empty."""


# ---------------------------------------------------------------------------
# Gamma function

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(z: float) -> float:
    """Gamma function by the Lanczos approximation (g=7, 9 terms).

    Relative accuracy is about 1e-15 for moderate positive arguments.
    """
    z = float(z)
    if z.is_integer() and 1 <= z <= 171:
        return float(math.factorial(int(z) - 1))
    if z < 0.5:
        return math.pi / (math.sin(math.pi * z) * gamma(1.0 - z))
    z -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * acc


# ---------------------------------------------------------------------------
# Bessel J


@dataclass(frozen=True)
class BesselEval:
    order: float
    x: float
    value: float
    method: str
    error_bound: float

    def __post_init__(self):
        if self.order < 0 or self.x < 0:
            raise ValueError("order and argument must be nonnegative")
        if not self.error_bound >= 0:
            raise ValueError("error bound must be nonnegative")
        if self.method == "krasikov":
            d = 2 * self.order
            if d != round(d) or d < 2 or self.x < d:
                raise ValueError("krasikov requires order d/2 with d >= 2 and x >= d")


_SERIES_DOUBLE_MAX = 10.0
_EPS = np.finfo(float).eps


def _half_integer(alpha: float) -> bool:
    return abs(alpha - 0.5 - round(alpha - 0.5)) < 1e-14


def _integer_d(alpha: float) -> int | None:
    d = 2.0 * alpha
    if abs(d - round(d)) < 1e-12:
        return int(round(d))
    return None


def _series_double(alpha: float, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    q = -(x / 2.0) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    absum = np.ones_like(x)
    xmax = float(x.max()) if x.size else 0.0
    m = 0
    while True:
        m += 1
        term = term * q / (m * (m + alpha))
        total = total + term
        absum = absum + np.abs(term)
        if m > xmax / 2.0 + 2 and np.all(np.abs(term) <= 1e-18 * absum):
            break
        if m > 500:
            break
    pref = (x / 2.0) ** alpha / gamma(alpha + 1.0)
    value = pref * total
    bound = np.abs(pref) * absum * (m + 4) * _EPS + 1e-14 * np.abs(value) + 1e-16
    return value, bound


def _series_extended(alpha: float, x: float):
    """Power series at one point, summed with enough decimal digits to absorb cancellation."""
    if x == 0.0:
        return (1.0 if alpha == 0 else 0.0), 0.0
    pref = (x / 2.0) ** alpha / gamma(alpha + 1.0)
    digits = 30 + int(x * math.log10(math.e)) + 1
    with localcontext() as ctx:
        ctx.prec = digits
        q = -((Decimal(x) / 2) ** 2)
        a = Decimal(alpha)
        threshold = Decimal(1e-30) / Decimal(pref)
        term = Decimal(1)
        total = Decimal(1)
        m = 0
        while True:
            m += 1
            term = term * q / (m * (m + a))
            total += term
            if m > x / 2.0 and abs(term) < threshold:
                break
            if m > 20000:
                raise AccuracyError(
                    "power series did not converge", best_value=float(total) * pref
                )
        s = float(total)
    value = pref * s
    # Lanczos gamma limits the relative accuracy of the prefactor.
    return value, 1e-13 * abs(value) + 1e-15


def _hankel(alpha: float, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    mu = 4.0 * alpha * alpha
    chi = x - (0.5 * alpha + 0.25) * math.pi
    kmax = 80
    exact = _half_integer(alpha)
    coeffs = [1.0]
    for k in range(1, kmax + 1):
        coeffs.append(coeffs[-1] * (mu - (2 * k - 1) ** 2) / (8.0 * k))
    p = np.zeros_like(x)
    qq = np.zeros_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    neglected = np.zeros_like(x)
    absum = np.zeros_like(x)
    for k, a_k in enumerate(coeffs):
        t = a_k / x**k
        mag = np.abs(t)
        # a terminating expansion is summed in full even where terms grow
        stop = active & (mag > prev) if not exact else np.zeros_like(active)
        neglected = np.where(stop, mag, neglected)
        active = active & ~stop
        sign = -1.0 if (k // 2) % 2 else 1.0
        contrib = np.where(active, sign * t, 0.0)
        if k % 2 == 0:
            p = p + contrib
        else:
            qq = qq + contrib
        absum = absum + np.where(active, mag, 0.0)
        prev = np.where(active, mag, prev)
        if a_k == 0.0:
            break
        if not active.any():
            break
    else:
        neglected = np.where(active, prev, neglected)
    amp = np.sqrt(2.0 / (math.pi * x))
    value = amp * (p * np.cos(chi) - qq * np.sin(chi))
    # phase error grows with |chi| through argument reduction
    bound = amp * (neglected + 32 * _EPS * absum * (1.0 + np.abs(chi)))
    return value, bound


def krasikov_terms(d: int, x):
    """Return ``(c_{d,x}, f_{d,x})`` for ``d >= 2`` and ``x >= d``.

    Works elementwise when ``x`` is an array.
    """
    if d < 2 or int(d) != d:
        raise DomainError(f"d must be an integer >= 2, got {d}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < d):
        raise DomainError(f"x must be >= d={d}")
    s = math.sqrt(d * d - 1.0) / (2.0 * xa)
    c = np.sqrt(1.0 - s * s)
    f = c + s * np.arcsin(s)
    if np.ndim(x) == 0:
        return float(c), float(f)
    return c, f


def krasikov_value(d: int, x):
    c, f = krasikov_terms(d, x)
    xa = np.asarray(x, dtype=float)
    return np.sqrt(2.0 / (math.pi * c * xa)) * np.cos(-(d + 1) * math.pi / 4.0 + f * xa)


def bessel_j_array(alpha: float, x, method: str = "accurate"):
    """Vectorised ``J_alpha(x)``; returns ``(values, error_bounds)``.

    ``method`` is ``"accurate"`` (series/hankel chosen per point),
    ``"series"`` (power series only), ``"hankel"`` or ``"krasikov"``.
    """
    if alpha < 0:
        raise DomainError("negative orders are not supported")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < 0) or not np.all(np.isfinite(xa)):
        raise DomainError("arguments must be finite and nonnegative")
    values = np.empty_like(xa)
    bounds = np.empty_like(xa)

    if method == "krasikov":
        d = _integer_d(alpha)
        if d is None or d < 2:
            raise DomainError("krasikov needs order d/2 with integer d >= 2")
        values[:] = krasikov_value(d, xa)
        bounds[:] = xa**-1.5
        return values, bounds
    if method == "hankel":
        if np.any(xa <= 0):
            raise DomainError("hankel expansion needs x > 0")
        return _hankel(alpha, xa)
    if method not in ("accurate", "series"):
        raise ValueError(f"unknown method {method!r}")

    small = xa <= _SERIES_DOUBLE_MAX
    if method == "accurate":
        if _half_integer(alpha):
            asym = (~small) | (xa >= max(8.0, 2.0 * alpha))
            asym &= xa > 0
        else:
            asym = xa >= max(30.0, alpha * alpha + 10.0)
        small &= ~asym
    else:
        asym = np.zeros_like(small)
    if small.any():
        values[small], bounds[small] = _series_double(alpha, xa[small])
    if asym.any():
        values[asym], bounds[asym] = _hankel(alpha, xa[asym])
    rest = ~(small | asym)
    for i in np.flatnonzero(rest):
        values[i], bounds[i] = _series_extended(alpha, float(xa[i]))
    return values, bounds


def bessel_j(alpha: float, x: float, method: str = "auto") -> BesselEval:
    """Evaluate ``J_alpha(x)`` with a method tag and an error bound.

    With ``method="auto"`` orders of the form ``d/2`` (integer ``d >= 2``)
    switch to the Krasikov form once ``x >= max(d, 20)``; everything else is
    evaluated by the power series (extended precision when needed) or, for
    half-integer orders at large ``x``, by the terminating Hankel expansion.
    """
    alpha = float(alpha)
    x = float(x)
    if alpha < 0 or x < 0:
        raise DomainError("bessel_j needs alpha >= 0 and x >= 0")
    if method == "auto":
        d = _integer_d(alpha)
        if d is not None and d >= 2 and x >= max(d, 20.0):
            method = "krasikov"
        elif x > _SERIES_DOUBLE_MAX and _half_integer(alpha) and x >= 2 * alpha:
            method = "hankel"
        else:
            method = "series"
    if method == "krasikov":
        d = _integer_d(alpha)
        if d is None or d < 2 or x < d:
            raise DomainError("krasikov form needs order d/2, d >= 2, x >= d")
        value = float(krasikov_value(d, x))
        return BesselEval(alpha, x, value, "krasikov", x**-1.5)
    if method == "hankel":
        v, b = _hankel(alpha, np.array([x]))
        return BesselEval(alpha, x, float(v[0]), "hankel", float(b[0]))
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    if x <= _SERIES_DOUBLE_MAX:
        v, b = _series_double(alpha, np.array([x]))
        return BesselEval(alpha, x, float(v[0]), "series", float(b[0]))
    v, b = _series_extended(alpha, x)
    return BesselEval(alpha, x, v, "series", b)


# ---------------------------------------------------------------------------
# Test functions


class _Kernel:
    """Normalised bump ``g(t) = C_m 4^(m+1) t^(m+1) (1-t)^(m+1)`` on [0, 1]."""

    def __init__(self, m: int):
        if m < 2:
            raise ValueError("smoothness m must be >= 2")
        self.m = m
        raw = Polynomial([0.0, 1.0]) ** (m + 1) * Polynomial([1.0, -1.0]) ** (m + 1) * 4.0 ** (m + 1)
        # product form: the expanded power basis cancels badly for larger m
        area, _ = integrate.quad(lambda t: (4.0 * t * (1.0 - t)) ** (m + 1), 0.0, 1.0, epsabs=0.0, epsrel=1e-13,
                                 limit=200)
        self.normalizer = 1.0 / area
        oracle = 1.0 / (4.0 ** (m + 1) * _scipy_special.beta(m + 2, m + 2))
        if abs(self.normalizer - oracle) > 1e-10 * oracle:
            raise ArithmeticError(f"bump normaliser quadrature disagrees with Beta oracle for m={m}")
        self.poly = raw * self.normalizer
        self.primitive = self.poly.integ(lbnd=0.0)
        self._derivs = [self.poly]

    def _deriv(self, k: int) -> Polynomial:
        while len(self._derivs) <= k:
            self._derivs.append(self._derivs[-1].deriv())
        return self._derivs[k]

    def g(self, t: np.ndarray, nu: int = 0) -> np.ndarray:
        # g(t) = g(1-t): evaluate on the half near 0 where the monomial basis is well conditioned
        t = np.asarray(t, dtype=float)
        p = self._deriv(nu)
        left = t <= 0.5
        out = np.empty_like(t)
        out[left] = p(t[left])
        out[~left] = (-1.0) ** nu * p(1.0 - t[~left])
        return out

    def G(self, t: np.ndarray, nu: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if nu > 0:
            return self.g(t, nu - 1)
        left = t <= 0.5
        out = np.empty_like(t)
        out[left] = self.primitive(t[left])
        out[~left] = 1.0 - self.primitive(1.0 - t[~left])
        return out


@lru_cache(maxsize=None)
def _kernel(m: int) -> _Kernel:
    return _Kernel(m)


def _as_array(x):
    return np.asarray(x, dtype=float)


def _scalar_out(x, out):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class BumpDensity:
    """``(1/K) g((x - shift)/K)``: nonnegative, supported on ``[shift, shift+K]``, unit mass."""

    m: int
    scale: float
    shift: float = 0.0
    kind: str = field(default="density", init=False)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        _kernel(self.m)

    @property
    def normalizer(self) -> float:
        return _kernel(self.m).normalizer

    @property
    def support(self) -> tuple[float, float]:
        return (self.shift, self.shift + self.scale)

    @property
    def knots(self) -> tuple[float, ...]:
        return self.support

    def __call__(self, x, nu: int = 0):
        xa = _as_array(x)
        t = (xa - self.shift) / self.scale
        inside = (t >= 0.0) & (t <= 1.0)
        out = np.zeros(np.shape(t))
        out[inside] = _kernel(self.m).g(t[inside], nu) / self.scale ** (nu + 1)
        return _scalar_out(x, out)

    def derivative_bounds(self, order: int | None = None, points: int = 20001) -> np.ndarray:
        """Measured ``max |d^k/dx^k|`` for ``k = 0..order`` (default ``m``)."""
        order = self.m if order is None else order
        x = np.linspace(*self.support, points)
        return np.array([np.max(np.abs(self(x, k))) for k in range(order + 1)])


@dataclass(frozen=True)
class SmoothStep:
    """``G(x) = int_{-inf}^x g``: 0 for ``x <= 0``, 1 for ``x >= 1``, nondecreasing."""

    m: int
    kind: str = field(default="step", init=False)

    def __post_init__(self):
        _kernel(self.m)

    @property
    def normalizer(self) -> float:
        return _kernel(self.m).normalizer

    def __call__(self, x, nu: int = 0):
        xa = _as_array(x)
        out = np.zeros(np.shape(xa))
        inside = (xa > 0.0) & (xa < 1.0)
        out[inside] = _kernel(self.m).G(xa[inside], nu)
        if nu == 0:
            out[xa >= 1.0] = 1.0
        return _scalar_out(x, out)


@dataclass(frozen=True)
class Plateau:
    """``b_(K)(x) = b(x/K)``: 1 on ``[-K, K]``, 0 outside ``[-2K, 2K]``."""

    m: int
    scale: float = 1.0
    kind: str = field(default="plateau", init=False)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        _kernel(self.m)

    @property
    def normalizer(self) -> float:
        return _kernel(self.m).normalizer

    @property
    def support(self) -> tuple[float, float]:
        return (-2.0 * self.scale, 2.0 * self.scale)

    @property
    def knots(self) -> tuple[float, ...]:
        k = self.scale
        return (-2 * k, -k, k, 2 * k)

    def __call__(self, x, nu: int = 0):
        xa = _as_array(x)
        t = np.abs(xa) / self.scale
        out = np.zeros(np.shape(t))
        if nu == 0:
            out[t < 1.0] = 1.0
        ramp = (t >= 1.0) & (t <= 2.0)
        if ramp.any():
            # d^nu/dx^nu G(2 - |x|/K) = (-sign(x)/K)^nu G^(nu)(2 - |x|/K)
            sgn = np.sign(xa[ramp])
            vals = _kernel(self.m).G(2.0 - t[ramp], nu)
            out[ramp] = vals * (-sgn / self.scale) ** nu
        return _scalar_out(x, out)


@dataclass(frozen=True)
class RadialProfile:
    """Wrap a plain callable ``f1(r)`` with its support for radial transforms."""

    func: Callable
    support: tuple[float, float]
    knots: tuple[float, ...] = ()

    def __call__(self, r, nu: int = 0):
        if nu:
            raise NotImplementedError("plain callables carry no derivatives")
        return self.func(r)


def bump_density(m: int, K: float, shift: float = 0.0) -> BumpDensity:
    return BumpDensity(m, K, shift)


def smooth_step(m: int) -> SmoothStep:
    return SmoothStep(m)


def plateau(m: int, K: float) -> Plateau:
    return Plateau(m, K)


def tabulate(func: Callable, x: Sequence[float]) -> np.ndarray:
    """Two-column ``(x, value)`` table of a callable, ready for CSV output."""
    x = np.asarray(x, dtype=float)
    return np.column_stack([x, np.asarray(func(x), dtype=float)])


# ---------------------------------------------------------------------------
# Interval scan for the cosine condition


def _cos_phase(r, n: int, K3: float, d: int):
    x = K3 * np.asarray(r, dtype=float)
    _, f = krasikov_terms(d, x)
    return np.cos(-(n + 1) * math.pi / 4.0 + f * x)


def scan_cos_interval(n: int, K3: float, start_at: float, order_d: int | None = None):
    """First interval ``[K1, K1+eps]`` with ``K1 >= start_at`` where
    ``cos(-(n+1)pi/4 + f_{d,K3 r} K3 r) >= 1/sqrt(2)`` throughout.

    The condition is sampled on a lattice of spacing ``pi/(64 K3)``; the arc
    endpoints are then located by bracketed root finding, so the reported
    interval is the full arc (pulled in by a relative 1e-12).  ``order_d``
    defaults to ``n``.

    Returns ``(K1, eps)``.
    """
    if n % 4 != 3:
        raise ValueError("n must be 3 mod 4")
    if K3 < math.sqrt(n) - 1e-12:
        raise ValueError("K3 must be >= sqrt(n)")
    d = n if order_d is None else int(order_d)
    if K3 * start_at < d:
        raise DomainError("K3 * start_at must be >= d for the Krasikov phase")
    thresh = 1.0 / math.sqrt(2.0)
    step = math.pi / (64.0 * K3)
    limit = start_at + 10.0 * 4.0 * math.pi / (K3 * math.sqrt(0.75))
    r = start_at + step * np.arange(int(math.ceil((limit - start_at) / step)) + 1)
    ok = _cos_phase(r, n, K3, d) >= thresh
    edges = np.diff(ok.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1)
    if starts.size == 0:
        raise SearchError("no admissible interval found; the pigeonhole guarantee is violated")
    i0 = starts[0]
    after = ends[ends >= i0]
    if after.size == 0:
        raise SearchError("admissible interval runs past the search window")
    i1 = after[0]

    def phi(t):
        return float(_cos_phase(t, n, K3, d)) - thresh

    left = optimize.brentq(phi, r[i0 - 1], r[i0], xtol=1e-15, rtol=4 * _EPS)
    right = optimize.brentq(phi, r[i1], r[i1 + 1], xtol=1e-15, rtol=4 * _EPS)
    margin = 1e-12 * right
    K1 = left + margin
    eps = (right - margin) - K1
    probe = np.linspace(K1, K1 + eps, 1001)
    if not np.all(_cos_phase(probe, n, K3, d) >= thresh - 1e-12):
        raise SearchError("cosine condition fails inside the located interval")
    return K1, eps
