"""A radial function that is expensive for one hidden layer but cheap as a composition.

``f(x) = f1(|x|)`` with ``f1`` a narrow unit-mass bump placed on an interval
``[K1, K1+eps]`` where the Bessel phase makes ``f^`` large near ``|w| = K3``.
The lower bound on its Barron constant over ``2 K2 B_n`` uses the radial
plateau ``g = b_(K2)(|x|)`` as localiser; the denominator ``int |g^|`` is
bounded through ``(I - Laplacian)^k g`` in ``L^2``.  The composition
``f = h(|x|^2)`` is bounded by the square-norm and the 1-D bounds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .barron import (
    BarronEstimate,
    GammaPair,
    l1_fourier_bound_1d,
    square_norm_bound,
    upper_bound_radial,
)
from .special import BumpDensity, Plateau, bump_density, plateau, scan_cos_interval
from .spectral import Ball, GridFunction, forward_ft, radial_ft


class ConfigError(ValueError):
    pass


class SingularityError(ValueError):
    pass


class ValidityWarning(UserWarning):
    pass


F_SMOOTHNESS = 4


def log_sphere_area(n: int) -> float:
    """``log(2 pi^(n/2) / Gamma(n/2))``."""
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - math.lgamma(n / 2.0)


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SeparationConfig:
    n: int
    C3: float
    C1: float = 17.0
    C2: float = 18.0
    K1: float = field(init=False)
    eps: float = field(init=False)

    def __post_init__(self):
        if self.n % 4 != 3:
            raise ConfigError(f"n must be 3 mod 4, got {self.n}")
        if not (self.C2 > self.C1 >= 1.0):
            raise ConfigError("need C2 > C1 >= 1")
        if self.C3 < 1.0:
            raise ConfigError("need C3 >= 1")
        if self.C1 * self.C3 < 1.5:
            raise ConfigError("need C1 * C3 >= 3/2")
        K1, eps = scan_cos_interval(self.n, self.K3, self.C1 * math.sqrt(self.n))
        object.__setattr__(self, "K1", K1)
        object.__setattr__(self, "eps", eps)
        if not self.K2 > K1 + eps:
            raise ConfigError(f"K2 = {self.K2} does not clear the bump support end {K1 + eps}")

    @property
    def K2(self) -> float:
        return self.C2 * self.n

    @property
    def K3(self) -> float:
        return self.C3 * math.sqrt(self.n)

    @property
    def radius(self) -> float:
        """Radius of the ball the Barron constants refer to."""
        return 2.0 * self.K2

    @property
    def composition_regime(self) -> bool:
        """``C3 < C1``: the regime where the 1-D factor grows like ``C3^(3/2)``."""
        return self.C3 < self.C1

    @property
    def laplacian_order(self) -> int:
        return (self.n + 1) // 4

    @property
    def plateau_smoothness(self) -> int:
        return max(2, (self.n + 1) // 2)

    def to_dict(self) -> dict:
        return {"n": self.n, "C1": self.C1, "C2": self.C2, "C3": self.C3,
                "K1": self.K1, "K2": self.K2, "K3": self.K3, "eps": self.eps}


def build_f(config: SeparationConfig) -> BumpDensity:
    """Unit-mass bump on ``[K1, K1+eps]``."""
    return bump_density(F_SMOOTHNESS, config.eps, config.K1)


def build_g(config: SeparationConfig) -> Plateau:
    return plateau(config.plateau_smoothness, config.K2)


# ---------------------------------------------------------------------------
# Iterated radial Laplacian
#
# (I - Lap)^k f1(|x|) = sum_{i,j} c_ij n^j f1^(i)(r) / r^j, every c_ij a
# polynomial in u = 1/n with rational coefficients (stored low order first).


def _padd(p, q):
    out = [Fraction(0)] * max(len(p), len(q))
    for i, v in enumerate(p):
        out[i] += v
    for i, v in enumerate(q):
        out[i] += v
    return tuple(out)


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


def _peval(p, u: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * u + c
    return acc


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return tuple(p)


@dataclass(frozen=True)
class LaplacianCoeffs:
    order: int
    table: dict
    majorant: dict

    def exact(self, n: int) -> dict:
        u = Fraction(1, n)
        return {key: _peval(p, u) for key, p in self.table.items()}

    def at(self, n: int) -> dict:
        return {key: float(v) for key, v in self.exact(n).items()}

    def abs_sum(self, n: int | None = None) -> Fraction:
        """Exact ``sum |c_ij|`` at dimension ``n`` (``None`` means the ``n -> inf`` limit)."""
        if n is None:
            return sum((abs(p[0]) for p in self.table.values()), Fraction(0))
        return sum((abs(v) for v in self.exact(n).values()), Fraction(0))

    def majorant_sum(self) -> Fraction:
        return sum(self.majorant.values(), Fraction(0))

    def nonzero(self, n: int | None = None) -> set:
        if n is None:
            return {k for k, p in self.table.items() if any(c != 0 for c in p)}
        return {k for k, v in self.exact(n).items() if v != 0}

    def valid_for(self, n: int) -> bool:
        return self.order <= n / 4 + 1


def radial_laplacian_coeffs(k: int, n: int | None = None) -> LaplacianCoeffs:
    """Coefficient table of ``(I - Lap)^k`` on radial functions, built step by step.

    Each step maps a term ``c f1^(i) / r^j`` (with its ``n^j``) to

    * ``(i, j)``:         ``+c``
    * ``(i, j+2)``:       ``+c (n-1) j / n^2 - c j (j+1) / n^2``
    * ``(i+1, j+1)``:     ``-c (n-1) / n + c 2j / n``
    * ``(i+2, j)``:       ``-c``

    The majorant applies the worst-case factors ``1, 1/2, 1, 1/4, 1, 1`` to
    ``|c|`` and therefore bounds every entry when ``k <= n/4 + 1``.
    Passing ``n`` only triggers the validity warning.
    """
    if k < 0:
        raise ValueError("order must be >= 0")
    if n is not None and k > n / 4 + 1:
        warnings.warn(f"order {k} exceeds n/4 + 1 = {n / 4 + 1}; the 5^k bound is not guaranteed",
                      ValidityWarning, stacklevel=2)
    one = (Fraction(1),)
    table = {(0, 0): one}
    major = {(0, 0): Fraction(1)}
    for _ in range(k):
        nxt: dict = {}
        nmaj: dict = {}

        def put(key, poly, m):
            nxt[key] = _padd(nxt.get(key, (Fraction(0),)), poly)
            nmaj[key] = nmaj.get(key, Fraction(0)) + m

        for (i, j), c in table.items():
            m = major[(i, j)]
            put((i, j), c, m)
            if j > 0:
                # (n-1) j / n^2 = j (u - u^2); j (j+1) / n^2 = j (j+1) u^2
                put((i, j + 2), _pmul(c, (Fraction(0), Fraction(j), Fraction(-j))), m / 2)
                put((i, j + 2), _pmul(c, (Fraction(0), Fraction(0), Fraction(-j * (j + 1)))), m / 4)
                put((i + 1, j + 1), _pmul(c, (Fraction(0), Fraction(2 * j))), m)
            # -(n-1)/n = -(1 - u)
            put((i + 1, j + 1), _pmul(c, (Fraction(-1), Fraction(1))), m)
            put((i + 2, j), _pmul(c, (Fraction(-1),)), m)
        table = {key: _trim(p) for key, p in nxt.items()}
        major = nmaj
    return LaplacianCoeffs(k, table, major)


def apply_radial_operator(coeffs: LaplacianCoeffs, profile, n: int, r) -> np.ndarray:
    """Evaluate ``sum c_ij n^j f1^(i)(r) / r^j`` on a lattice of radii.

    ``profile(r, nu)`` must return the ``nu``-th derivative.
    """
    r = np.asarray(r, dtype=float)
    vals = coeffs.exact(n)
    out = np.zeros_like(r)
    cache = {}
    for (i, j), c in vals.items():
        if c == 0:
            continue
        if i not in cache:
            cache[i] = np.asarray(profile(r, i), dtype=float)
        d = cache[i]
        if j > 0:
            at0 = r == 0.0
            if np.any(at0 & (d != 0.0)):
                raise SingularityError("r = 0 with a nonvanishing derivative and a 1/r^j factor")
            with np.errstate(divide="ignore", invalid="ignore"):
                term = np.where(at0, 0.0, d / np.where(at0, 1.0, r) ** j)
        else:
            term = d
        out += float(c * Fraction(n) ** j) * term
    return out


# ---------------------------------------------------------------------------
# Denominator: L1 norm of the localiser spectrum


def _gauss_legendre(func, a: float, b: float, pieces: int = 64, nodes: int = 24) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, pieces + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    pts = mid + half * x[None, :]
    return float(np.sum(func(pts.ravel()).reshape(pts.shape) * w[None, :] * half))


def g_l1_fourier_bound(config: SeparationConfig, direct: bool | None = None, grid_resolution: int = 96,
                       freq_resolution: int = 97) -> dict:
    """Upper bound on ``int |g^|`` through ``|| (I - Lap)^((n+1)/4) g ||_2`` and its prefactor.

    The square norm splits into the flat core (where the operator leaves the
    value 1) and the ramp ``K2 <= r <= 2 K2`` integrated by Gauss-Legendre.
    For ``n = 3`` (or ``direct=True``) also returns the direct grid and radial
    estimates of ``int |g^|``.
    """
    n = config.n
    if (n + 1) % 4:
        raise ConfigError("(n+1)/4 must be an integer")
    k = config.laplacian_order
    g = build_g(config)
    coeffs = radial_laplacian_coeffs(k, n)
    K2 = config.K2

    def sq(r):
        return r ** (n - 1) * apply_radial_operator(coeffs, g, n, r) ** 2

    ramp = _gauss_legendre(sq, K2, 2.0 * K2)
    core = K2**n / n
    log_l2sq = log_sphere_area(n) + math.log(core + ramp)
    log_pref = 0.5 * (math.lgamma(0.5) - n * math.log(2.0) - 0.5 * n * math.log(math.pi) - math.lgamma((n + 1) / 2.0))
    log_bound = log_pref + 0.5 * log_l2sq
    out = {
        "bound": math.exp(log_bound),
        "log_bound": log_bound,
        "log_prefactor": log_pref,
        "log_l2": 0.5 * log_l2sq,
        "order": k,
        "plateau_m": config.plateau_smoothness,
        "direct_grid": None,
        "direct_radial": None,
    }
    if direct is None:
        direct = n == 3
    if direct:
        out["direct_radial"] = g_l1_radial(g, n)
        if n == 3:
            out["direct_grid"] = g_l1_grid(g, grid_resolution, freq_resolution)
    return out


def g_l1_radial(g, n: int, rho_max: float | None = None) -> float:
    """``S_{n-1} int rho^(n-1) |g^(rho)| d rho`` truncated at ``rho_max``."""
    K = g.scale
    if rho_max is None:
        rho_max = 60.0 / K
    step = 2.0 * math.pi / (2.0 * K) / 32.0
    m = int(math.ceil(rho_max / step))
    m += m % 2
    rho = np.linspace(0.0, rho_max, m + 1)
    vals = np.abs(radial_ft(g, n, rho)) * rho ** (n - 1)
    h = rho_max / m
    simpson = h / 3.0 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-1:2].sum())
    return math.exp(log_sphere_area(n)) * simpson


def g_l1_grid(g, resolution: int = 96, freq_resolution: int = 97) -> float:
    """Riemann sum of ``|g^|`` from the full 3-D grid transform."""
    R = 2.0 * g.scale
    half = R * 1.05
    G = GridFunction.from_function(lambda p: g(np.linalg.norm(p, axis=-1)), np.zeros(3), half, resolution)
    cutoff = 0.95 * math.pi / float(G.spacing[0])
    s = forward_ft(G, cutoff, freq_resolution)
    return s.integrate()


# ---------------------------------------------------------------------------
# Numerator and lower bound


def half_peak_shell(profile, n: int, center: float, period: float, samples: int = 801):
    """Locate the lobe of ``|f^(rho)|`` containing ``center`` and the sub-interval
    around its maximum where ``|f^|`` stays above half the peak.

    Returns ``(lo, hi, peak_rho, peak)``.
    """
    rho = np.linspace(max(center - period, 1e-9), center + period, samples)
    v = radial_ft(profile, n, rho)
    i0 = int(np.argmin(np.abs(rho - center)))
    sgn = np.sign(v[i0]) if v[i0] != 0 else 1.0
    left = i0
    while left > 0 and np.sign(v[left - 1]) == sgn:
        left -= 1
    right = i0
    while right < len(rho) - 1 and np.sign(v[right + 1]) == sgn:
        right += 1
    lobe = np.abs(v[left:right + 1])
    ip = left + int(np.argmax(lobe))
    peak = float(np.abs(v[ip]))
    lo = ip
    while lo > left and np.abs(v[lo - 1]) >= 0.5 * peak:
        lo -= 1
    hi = ip
    while hi < right and np.abs(v[hi + 1]) >= 0.5 * peak:
        hi += 1
    return float(rho[lo]), float(rho[hi]), float(rho[ip]), peak


def f_spectral_numerator(config: SeparationConfig, nodes: int = 401) -> dict:
    """``int_{shell} |w| |f^(w)| dw`` over the half-peak shell near ``K3``."""
    f = build_f(config)
    n = config.n
    period = 2.0 * math.pi / config.K1
    lo, hi, prho, peak = half_peak_shell(f, n, config.K3, period)
    if hi <= lo:
        return {"value": 0.0, "shell": (lo, hi), "peak_rho": prho, "peak": peak}
    rho = np.linspace(lo, hi, nodes if nodes % 2 else nodes + 1)
    v = np.abs(radial_ft(f, n, rho)) * rho**n
    h = (hi - lo) / (len(rho) - 1)
    simpson = h / 3.0 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum())
    return {"value": math.exp(log_sphere_area(n)) * simpson, "shell": (lo, hi), "peak_rho": prho, "peak": peak}


def fhat_at_K3(config: SeparationConfig) -> dict:
    """Spectrum at ``|w| = K3`` next to the closed-form leading-order expression."""
    n = config.n
    val = float(radial_ft(build_f(config), n, [config.K3])[0])
    ref = (1.0 / (2 * math.pi)) * (config.K1 / (2 * math.pi * config.K3)) ** ((n - 3) / 2.0) * math.sqrt(1.0 / math.pi)
    return {"value": val, "reference": ref, "ratio": val / ref}


def f_lower_bound(config: SeparationConfig, g_bound: dict | None = None, nodes: int = 401) -> BarronEstimate:
    """``2 K2 * int_{shell} |w||f^| / (bound on int |g^|)`` on ``ball(2 K2)``."""
    if not config.K2 > config.K1 + config.eps:
        raise ConfigError("plateau does not cover the bump")
    if g_bound is None:
        g_bound = g_l1_fourier_bound(config, direct=False)
    num = f_spectral_numerator(config, nodes)
    log_val = math.log(config.radius) + math.log(num["value"]) - g_bound["log_bound"] if num["value"] > 0 else -math.inf
    value = math.exp(log_val) if num["value"] > 0 else 0.0
    return BarronEstimate(
        "lower",
        value,
        Ball(config.radius, config.n),
        {"tag": "half-peak-shell", "numerator": num["value"], "shell": list(num["shell"]),
         "denominatorBound": g_bound["bound"], "logValue": log_val},
        0.0,
        "radial bump with plateau localiser",
    )


# ---------------------------------------------------------------------------
# Upper bounds


def _h_samples(f: BumpDensity, K1: float, eps: float, points: int):
    """``h(y) = f1(sqrt y)`` and two derivatives on ``[K1^2, (K1+eps)^2]``."""
    y = np.linspace(K1**2, (K1 + eps) ** 2, points)
    s = np.sqrt(y)
    f0, f1, f2 = f(s), f(s, 1), f(s, 2)
    h = f0
    dh = f1 / (2.0 * s)
    d2h = f2 / (4.0 * y) - f1 / (4.0 * y * s)
    return y, h, dh, d2h


def factor_upper_bounds(config: SeparationConfig, r: float | None = None, s: float | None = None,
                        points: int = 20001):
    """Upper estimates for ``|x|^2`` on ``ball(r)`` and ``y -> f1(sqrt y)`` on ``[-s, s]``."""
    r = config.radius if r is None else r
    s = r * r if s is None else s
    if r <= 0 or s <= 0:
        raise ValueError("r and s must be positive")
    sq = square_norm_bound(config.n, r)
    f = build_f(config)
    y, h, dh, d2h = _h_samples(f, config.K1, config.eps, points)
    pair = l1_fourier_bound_1d(y, h, dh, d2h)
    one = BarronEstimate("upper", s * pair.c, Ball(s, 1),
                         {"tag": "gamma-pair", "a": pair.a, "c": pair.c, "support": [float(y[0]), float(y[-1])]},
                         0.0, "bump through square root")
    return sq, one


def f_direct_upper(config: SeparationConfig, periods: float = 40.0, per_lobe: int = 8) -> BarronEstimate | None:
    """Self-extension upper estimate; ``None`` when the spectral moment diverges.

    With a ``C^4`` bump, ``rho^n |f^(rho)|`` decays like ``rho^((n-1)/2 - 6)`` so
    the moment is finite only for ``n < 11``.
    """
    n = config.n
    if (n - 1) / 2.0 - (F_SMOOTHNESS + 2) >= -1.0:
        return None
    f = build_f(config)
    rho_max = periods * 2.0 * math.pi / config.eps
    step = 2.0 * math.pi / (config.K1 + config.eps) / per_lobe
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return upper_bound_radial(f, n, config.radius, rho_max, rho_step=step)


# ---------------------------------------------------------------------------
# Report


def theory_terms(config: SeparationConfig) -> dict:
    """Log of the two asymptotic lower-bound shapes (before their unknown constants)."""
    n, C1, C2, C3 = config.n, config.C1, config.C2, config.C3
    core = (n / 2 - 3) * math.log(C1) + (n / 2) * math.log(C3) - (n / 2 - 1) * math.log(C2) + 0.5 * math.log(n)
    return {"log_theory_2": core - n * math.log(2.0), "log_theory_5": core - (n / 2) * math.log(5.0)}


def separation_row(config: SeparationConfig, direct: bool = True) -> dict:
    gb = g_l1_fourier_bound(config, direct=False)
    lower = f_lower_bound(config, gb)
    sq, one = factor_upper_bounds(config)
    ratio = lower.value / (sq.value + one.value)
    row = {
        "n": config.n, "C1": config.C1, "C2": config.C2, "C3": config.C3,
        "K1": config.K1, "eps": config.eps,
        "lower_f": lower.value, "upper_sq": sq.value, "upper_1d": one.value, "ratio": ratio,
        "log_lower_f": lower.method["logValue"], "g_bound": gb["bound"],
        "numerator": lower.method["numerator"],
        "composition_regime": config.composition_regime,
    }
    row.update(theory_terms(config))
    d = f_direct_upper(config) if direct else None
    row["direct_upper_f"] = None if d is None else d.value
    row["direct_upper_tail"] = None if d is None else d.tail_estimate
    return row


def separation_report(ns=(3, 7, 11), c3s=(4.0, 8.0, 16.0), C1: float = 17.0, C2: float = 18.0,
                      direct_ns=(3,), extend_to: float | None = 4096.0) -> dict:
    """Table over ``(n, C3)`` plus, per ``n``, the smallest ``C3`` with ratio above 1.

    When no grid value crosses 1 the search continues by doubling ``C3`` up to
    ``extend_to`` (ratios only).  Measured constants relate each lower bound to
    the two asymptotic shapes, normalised at the first ``C3`` of the grid.
    """
    rows = []
    summary = {}
    for n in ns:
        nrows = []
        for c3 in c3s:
            nrows.append(separation_row(SeparationConfig(n, float(c3), C1, C2), direct=n in direct_ns))
        base = nrows[0]
        for row in nrows:
            for key in ("2", "5"):
                const = math.exp(base["log_lower_f"] - base[f"log_theory_{key}"])
                row[f"theory_{key}"] = const * math.exp(row[f"log_theory_{key}"])
        ratios = [r["ratio"] for r in nrows]
        crossing = next((r["C3"] for r in nrows if r["ratio"] > 1.0), None)
        searched = [float(c) for c in c3s]
        if crossing is None and extend_to is not None:
            c3 = 2.0 * max(c3s)
            while c3 <= extend_to:
                row = separation_row(SeparationConfig(n, c3, C1, C2), direct=False)
                searched.append(c3)
                if row["ratio"] > 1.0:
                    crossing = c3
                    break
                c3 *= 2.0
        summary[n] = {
            "increasing_in_C3": bool(all(b > a for a, b in zip(ratios, ratios[1:]))),
            "smallest_C3_ratio_above_1": crossing,
            "searched_C3": searched,
        }
        rows.extend(nrows)
    return {"rows": rows, "summary": summary}


CSV_COLUMNS = ("n", "C1", "C2", "C3", "K1", "eps", "lower_f", "upper_sq", "upper_1d", "ratio")
