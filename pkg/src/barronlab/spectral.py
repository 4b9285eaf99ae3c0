"""Continuous Fourier transforms on uniform grids.

Convention throughout::

    f^(w) = (2 pi)^-n  int f(x) exp(-i <w, x>) dx
    f(x)  =            int f^(w) exp(+i <w, x>) dw

Grid nodes along each axis are ``center - h + j*dx`` with ``dx = 2h/N`` and
``j = 0..N-1``.  For functions that vanish at the box boundary the trapezoid
rule on ``[-h, h]`` reduces to the plain sum over these nodes, which is also
what makes the DFT usable when the frequency nodes sit on DFT bins.

Frequency grids are uniform per axis, ``linspace(-cutoff, cutoff, M)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .special import bessel_j_array


class InvalidInputError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a uniform box grid, indexed ``[i0, i1, ...]`` (row-major)."""

    center: np.ndarray
    half_width: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = values.ndim
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        half_width = np.atleast_1d(np.asarray(self.half_width, dtype=float))
        if n < 1:
            raise InvalidInputError("grid function needs at least one axis")
        if center.shape != (n,) or half_width.shape != (n,):
            raise InvalidInputError("center/half_width must have one entry per axis")
        if len(set(values.shape)) != 1:
            raise InvalidInputError("grid must have the same resolution on every axis")
        if np.any(half_width <= 0):
            raise InvalidInputError("half-widths must be strictly positive")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("grid samples must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", half_width)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> np.ndarray:
        return 2.0 * self.half_width / self.resolution

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return node_axes(self.center, self.half_width, self.resolution)

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(N, ..., N, n)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.center, self.half_width, values)

    @classmethod
    def from_function(cls, func: Callable, center, half_width, resolution: int) -> "GridFunction":
        """Sample ``func(points)`` where ``points`` has shape ``(N, ..., N, n)``."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        half_width = np.broadcast_to(np.asarray(half_width, dtype=float), center.shape).copy()
        axes = node_axes(center, half_width, resolution)
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(center, half_width, np.asarray(func(pts), dtype=float))

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * float(other))

    __rmul__ = __mul__


def node_axes(center, half_width, resolution: int) -> list[np.ndarray]:
    center = np.atleast_1d(center)
    half_width = np.atleast_1d(half_width)
    j = np.arange(resolution)
    return [c - h + j * (2.0 * h / resolution) for c, h in zip(center, half_width)]


def _same_grid(a: GridFunction, b: GridFunction):
    if (
        a.values.shape != b.values.shape
        or not np.allclose(a.center, b.center, rtol=0, atol=1e-12)
        or not np.allclose(a.half_width, b.half_width, rtol=1e-12, atol=0)
    ):
        raise InvalidInputError("grid functions live on different grids")


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    """Complex amplitudes on a centred uniform frequency grid."""

    axes: tuple
    amplitudes: np.ndarray
    cutoff: float
    tail_mass: float = 0.0

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != tuple(len(a) for a in axes):
            raise InvalidInputError("one amplitude per frequency node is required")
        if not np.all(np.isfinite(amps)):
            raise InvalidInputError("amplitudes must be finite")
        if self.cutoff <= 0:
            raise InvalidInputError("cutoff must be positive")
        for a in axes:
            if np.max(np.abs(a)) > self.cutoff * (1 + 1e-12):
                raise InvalidInputError("frequency nodes exceed the cutoff")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] if len(a) > 1 else 2.0 * self.cutoff for a in self.axes])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self) -> np.ndarray:
        """Frequency vectors, shape ``(M, ..., M, n)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def shell_mask(self) -> np.ndarray:
        """Nodes on the outermost layer of the frequency box."""
        mask = np.zeros(self.amplitudes.shape, dtype=bool)
        for ax in range(self.dimension):
            idx = [slice(None)] * self.dimension
            for edge in (0, -1):
                idx[ax] = edge
                mask[tuple(idx)] = True
        return mask

    def integrate(self, weight: np.ndarray | None = None) -> float:
        """Riemann sum of ``weight * |amplitude|`` over the grid."""
        mag = np.abs(self.amplitudes)
        if weight is not None:
            mag = mag * weight
        return float(mag.sum() * self.cell_volume)


# ---------------------------------------------------------------------------
# Bounded sets and the support norm


@dataclass(frozen=True)
class Ball:
    radius: float
    dim: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.dim < 0:
            raise ValueError("dimension must be nonnegative")

    kind = "ball"

    def to_dict(self):
        return {"kind": "ball", "radius": self.radius, "dim": self.dim}


@dataclass(frozen=True)
class Box:
    half_widths: tuple
    center: tuple | None = None

    def __post_init__(self):
        hw = tuple(float(h) for h in np.atleast_1d(self.half_widths))
        if any(h <= 0 for h in hw):
            raise ValueError("half-widths must be positive")
        if self.center is not None and np.any(np.asarray(self.center, dtype=float) != 0):
            raise ValueError("boxes must be centred at the origin")
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "center", None)

    kind = "box"

    @property
    def dim(self) -> int:
        return len(self.half_widths)

    def to_dict(self):
        return {"kind": "box", "half_widths": list(self.half_widths)}


@dataclass(frozen=True)
class Polytope:
    vertices: tuple

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    kind = "polytope"

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    def to_dict(self):
        return {"kind": "polytope", "vertices": [list(v) for v in self.vertices]}


BoundedSet = Ball | Box | Polytope


def bounded_set_from_dict(d: dict) -> BoundedSet:
    kind = d["kind"]
    if kind == "ball":
        return Ball(float(d["radius"]), int(d["dim"]))
    if kind == "box":
        return Box(tuple(d["half_widths"]))
    if kind == "polytope":
        return Polytope(tuple(map(tuple, d["vertices"])))
    raise ValueError(f"unknown set kind {kind!r}")


def support_norm(B: BoundedSet, omega) -> float | np.ndarray:
    """``sup_{x in B} |<omega, x>|``; ``omega`` may be ``(n,)`` or ``(..., n)``."""
    w = np.asarray(omega, dtype=float)
    if w.shape[-1:] != (B.dim,) and not (B.dim == 0 and w.size == 0):
        raise ValueError(f"dimension mismatch: set has dim {B.dim}, omega has {w.shape[-1:]}")
    if isinstance(B, Ball):
        out = B.radius * np.linalg.norm(w, axis=-1)
    elif isinstance(B, Box):
        out = np.abs(w) @ np.asarray(B.half_widths)
    elif isinstance(B, Polytope):
        out = np.max(np.abs(w @ np.asarray(B.vertices).T), axis=-1)
    else:
        raise TypeError(f"not a bounded set: {B!r}")
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Transforms


def _phase_matrix(freqs: np.ndarray, nodes: np.ndarray, sign: float) -> np.ndarray:
    return np.exp(sign * 1j * np.outer(freqs, nodes))


def _contract(values: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    out = values
    for axis, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [axis])), 0, axis)
    return out


def _on_dft_bins(freqs: np.ndarray, base: float) -> np.ndarray | None:
    q = freqs / base
    qi = np.rint(q)
    if np.max(np.abs(q - qi)) > 1e-9:
        return None
    return qi.astype(np.int64)


def forward_ft(
    f: GridFunction, cutoff: float, freq_resolution: int, method: str = "auto"
) -> SpectrumGrid:
    """Riemann-sum approximation of ``f^`` on ``linspace(-cutoff, cutoff, M)^n``.

    ``method`` is ``"direct"`` (separable summation), ``"fft"`` (requires
    frequency nodes on DFT bins) or ``"auto"``.
    """
    if cutoff <= 0:
        raise InvalidInputError("cutoff must be positive")
    if freq_resolution < 2:
        raise InvalidInputError("need at least two frequency nodes per axis")
    dx = f.spacing
    if np.any(cutoff > math.pi / dx * (1 + 1e-12)):
        raise ResolutionError(
            f"cutoff {cutoff} exceeds the Nyquist frequency {float(np.min(math.pi / dx)):.4g}; refine the grid"
        )
    n = f.dimension
    freq = np.linspace(-cutoff, cutoff, freq_resolution)
    axes = f.axes()
    scale = float(np.prod(dx)) / (2.0 * math.pi) ** n

    bins = None
    if method in ("auto", "fft"):
        bins = []
        for ax in range(n):
            b = _on_dft_bins(freq, 2.0 * math.pi / (f.resolution * dx[ax]))
            if b is None:
                bins = None
                break
            bins.append(b)
        if method == "fft" and bins is None:
            raise ResolutionError("frequency nodes do not coincide with DFT bins")
    if bins is not None:
        spec = np.fft.fftn(f.values)
        spec = spec[np.ix_(*[b % f.resolution for b in bins])]
        for ax in range(n):
            phase = np.exp(-1j * freq * axes[ax][0])
            shape = [1] * n
            shape[ax] = -1
            spec = spec * phase.reshape(shape)
        amps = scale * spec
    elif method in ("auto", "direct"):
        mats = [_phase_matrix(freq, axes[ax], -1.0) for ax in range(n)]
        amps = scale * _contract(f.values.astype(complex), mats)
    else:
        raise ValueError(f"unknown method {method!r}")

    s = SpectrumGrid(tuple(freq for _ in range(n)), amps, cutoff)
    tail = float(np.abs(amps)[s.shell_mask()].sum() * s.cell_volume)
    return SpectrumGrid(s.axes, amps, cutoff, tail)


def forward_ft_at(f: GridFunction, omegas) -> np.ndarray:
    """``f^`` at arbitrary frequency vectors ``omegas`` of shape ``(K, n)``."""
    w = np.atleast_2d(np.asarray(omegas, dtype=float))
    n = f.dimension
    if w.shape[1] != n:
        raise InvalidInputError("frequency vectors have the wrong dimension")
    axes = f.axes()
    mats = [np.exp(-1j * np.outer(w[:, ax], axes[ax])) for ax in range(n)]
    letters = "abcdefgh"[:n]
    expr = letters + "," + ",".join("k" + c for c in letters) + "->k"
    total = np.einsum(expr, f.values, *mats, optimize=True)
    return float(np.prod(f.spacing)) / (2.0 * math.pi) ** n * total


def inverse_ft(s: SpectrumGrid, center, half_width, resolution: int):
    """``f(x) = sum_k f^(w_k) exp(i<w_k, x>) dw`` on the requested grid.

    Returns ``(GridFunction, imag_residual)`` where the residual is the largest
    absolute imaginary part that was discarded.
    """
    n = s.dimension
    center = np.atleast_1d(np.asarray(center, dtype=float))
    half_width = np.broadcast_to(np.asarray(half_width, dtype=float), center.shape)
    if center.shape != (n,):
        raise InvalidInputError("target box dimension does not match the spectrum")
    axes = node_axes(center, half_width, resolution)
    mats = [_phase_matrix(axes[ax], s.axes[ax], 1.0) for ax in range(n)]
    vals = s.cell_volume * _contract(s.amplitudes, mats)
    return GridFunction(center, half_width, vals.real), float(np.max(np.abs(vals.imag)))


def _simpson(y: np.ndarray, h: float) -> float:
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def radial_ft(
    profile,
    n: int,
    omega_magnitudes,
    rtol: float = 1e-10,
    bessel_method: str = "accurate",
    return_bound: bool = False,
    chunk: int = 256,
):
    """Fourier transform of ``x -> f1(|x|)`` at the given ``|omega|``.

    Uses the Hankel form ``(2 pi)^(-n/2) rho^(1-n/2) int r^(n/2) f1(r) J_{n/2-1}(rho r) dr``
    integrated by composite Simpson over each smooth piece of the profile,
    starting from at least 32 nodes per Bessel period ``2 pi/rho`` and doubling
    until two successive rules agree to ``rtol``.  ``profile`` needs a
    ``support`` pair; ``knots`` (breakpoints) are used when present.

    With ``return_bound`` the propagated Bessel error bound is returned as a
    second array.
    """
    if n < 2:
        raise InvalidInputError("radial transform needs n >= 2")
    rho = np.atleast_1d(np.asarray(omega_magnitudes, dtype=float))
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise InvalidInputError("frequency magnitudes must be finite and nonnegative")
    a, b = profile.support
    a = max(a, 0.0)
    knots = sorted({k for k in (a, b, *getattr(profile, "knots", ())) if a <= k <= b})
    alpha = n / 2.0 - 1.0
    total = np.zeros_like(rho)
    bound = np.zeros_like(rho)
    order = np.argsort(rho)
    for lo, hi in zip(knots[:-1], knots[1:]):
        if hi <= lo:
            continue
        rr = np.linspace(lo, hi, 2049)
        scale = float(np.sum(np.abs(profile(rr)) * rr ** (n / 2.0)) * (hi - lo) / 2048)
        tol = rtol * max(scale, 1e-300)
        start = 0
        while start < len(order):
            w_hi = float(rho[order[min(start + chunk, len(order)) - 1]])
            npts = max(64, int(math.ceil(32.0 * (hi - lo) * w_hi / (2.0 * math.pi))))
            npts += npts % 2
            rows = int(max(1, min(chunk, 2_000_000 // (4 * npts))))
            idx = order[start:start + rows]
            start += rows
            w = rho[idx][:, None]
            prev = None
            for _ in range(10):
                r = np.linspace(lo, hi, npts + 1)
                fr = np.asarray(profile(r), dtype=float)
                x = w * r[None, :]
                jv, jb = bessel_j_array(alpha, x.ravel(), method=bessel_method)
                jv = jv.reshape(x.shape)
                jb = jb.reshape(x.shape)
                # J_a(x) / x^a is smooth at 0, so handle rho = 0 by its limit
                zero = w[:, 0] == 0.0
                kern = np.where(zero[:, None], 0.0, jv * r ** (n / 2.0))
                cur = _simpson_rows(fr * kern, (hi - lo) / npts)
                if zero.any():
                    lim = r ** (2 * alpha + 1) / (2.0**alpha * math.gamma(alpha + 1.0))
                    cur[zero] = _simpson_rows((fr * lim)[None, :], (hi - lo) / npts)[0]
                if prev is not None and np.all(np.abs(cur - prev) <= tol):
                    break
                if len(idx) * npts > 16_000_000:
                    break
                prev = cur
                npts *= 2
            total[idx] += cur
            bound[idx] += np.sum(np.abs(fr) * r ** (n / 2.0) * jb, axis=1) * (hi - lo) / npts
    with np.errstate(divide="ignore"):
        pref = (2.0 * math.pi) ** (-n / 2.0) * np.where(rho > 0, rho ** (1.0 - n / 2.0), 1.0)
    out = pref * total
    err = pref * np.where(rho > 0, bound, 0.0)
    if bessel_method not in ("accurate", "series") and np.any(err > 1e-6 * max(float(np.max(np.abs(out))), 1e-300)):
        import warnings

        warnings.warn(
            f"Bessel evaluation by {bessel_method!r} limits radial_ft accuracy to {float(err.max()):.3g}",
            stacklevel=2,
        )
    if return_bound:
        return out, err
    return out


def _simpson_rows(y: np.ndarray, h: float) -> np.ndarray:
    return h / 3.0 * (y[:, 0] + y[:, -1] + 4.0 * y[:, 1:-1:2].sum(axis=1) + 2.0 * y[:, 2:-1:2].sum(axis=1))


def radial_moment(
    profile,
    n: int,
    rho_max: float,
    power: float = 1.0,
    rho_step: float | None = None,
    rho_min: float = 0.0,
):
    """``int_{rho_min <= |w| <= rho_max} |w|^power |f^(w)| dw`` for a radial function.

    Evaluated as ``S_{n-1} int rho^(n-1+power) |f^(rho)| d rho`` by composite
    Simpson on a uniform rho lattice.  Returns ``(value, rho, fhat)``.
    """
    if rho_step is None:
        a, b = profile.support
        rho_step = 2.0 * math.pi / max(b, 1e-12) / 32.0
    m = max(2, int(math.ceil((rho_max - rho_min) / rho_step)))
    m += m % 2
    rho = np.linspace(rho_min, rho_max, m + 1)
    fhat = radial_ft(profile, n, rho)
    sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    integrand = rho ** (n - 1 + power) * np.abs(fhat)
    return sphere * _simpson(integrand, (rho_max - rho_min) / m), rho, fhat


def plancherel_residual(f: GridFunction, s: SpectrumGrid) -> float:
    """Relative mismatch between ``int |f|^2`` and ``(2 pi)^n int |f^|^2``."""
    energy = float(np.sum(f.values**2) * f.cell_volume)
    if energy == 0.0:
        return 0.0
    spec = (2.0 * math.pi) ** f.dimension * float(np.sum(np.abs(s.amplitudes) ** 2) * s.cell_volume)
    return abs(energy - spec) / energy


def gradient_grid(f: GridFunction) -> list[GridFunction]:
    """Central differences inside, one-sided at the boundary."""
    if f.resolution < 4:
        raise InvalidInputError("gradient needs at least 4 points per axis")
    grads = np.gradient(f.values, *f.spacing, edge_order=1)
    if f.dimension == 1:
        grads = [grads]
    return [f.with_values(g) for g in grads]
