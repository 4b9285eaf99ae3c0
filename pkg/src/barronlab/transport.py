"""Wasserstein distances between weighted point clouds, couplings and dual bounds."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

EXACT_BUDGET = 2000
MASS_TOL = 1e-12
MARGINAL_TOL = 1e-9


class InvalidMeasureError(ValueError):
    pass


class BudgetError(ValueError):
    pass


class InvalidLipschitzError(ValueError):
    pass


@dataclass
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or len(pts) != len(w) or len(w) == 0:
            raise InvalidMeasureError("points and weights must be nonempty and of equal length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InvalidMeasureError("non-finite points or weights")
        if np.any(w < 0):
            raise InvalidMeasureError("negative weight")
        self.points, self.weights = pts, w

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def dirac(cls, x) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), np.ones(1))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def check_probability(self):
        if abs(self.mass - 1.0) > MASS_TOL:
            raise InvalidMeasureError(f"weights sum to {self.mass!r}, not 1")

    def expect(self, f: Callable) -> float:
        vals = np.asarray(f(self.points), dtype=float).reshape(self.size)
        return float(self.weights @ vals)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalMeasure":
        return cls(np.asarray(d["points"]), np.asarray(d["weights"]))


def renormalize(mu: EmpiricalMeasure):
    """Scale a sub-probability measure to unit mass; returns ``(measure, excluded_mass)``."""
    m = mu.mass
    if m <= 0:
        raise InvalidMeasureError("zero total mass")
    return EmpiricalMeasure(mu.points, mu.weights / m), 1.0 - m


def read_measure_csv(path) -> EmpiricalMeasure:
    """Rows ``weight, x1, x2, ...``; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise InvalidMeasureError(f"bad row in {path}: {row}")
    if not rows:
        raise InvalidMeasureError(f"{path} has no data rows")
    a = np.asarray(rows)
    return EmpiricalMeasure(a[:, 1:], a[:, 0])


def write_measure_csv(mu: EmpiricalMeasure, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["weight"] + [f"x{i + 1}" for i in range(mu.dim)])
        for w, p in zip(mu.weights, mu.points):
            wr.writerow([repr(float(w))] + [repr(float(v)) for v in p])


def read_measure_json(path) -> EmpiricalMeasure:
    with open(path) as fh:
        return EmpiricalMeasure.from_dict(json.load(fh))


@dataclass
class Coupling:
    matrix: np.ndarray

    def validate(self, mu: EmpiricalMeasure, nu: EmpiricalMeasure, tol: float = MARGINAL_TOL):
        g = self.matrix
        if g.shape != (mu.size, nu.size):
            raise InvalidMeasureError("coupling shape does not match the measures")
        if np.any(g < -tol):
            raise InvalidMeasureError("negative coupling entry")
        if np.max(np.abs(g.sum(axis=1) - mu.weights)) > tol or np.max(np.abs(g.sum(axis=0) - nu.weights)) > tol:
            raise InvalidMeasureError("coupling marginals do not match")
        return self

    def cost(self, C) -> float:
        return float(np.sum(self.matrix * C))


def cost_matrix(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int) -> np.ndarray:
    return cdist(mu.points, nu.points) ** p


def _check_pair(mu, nu, p):
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if mu.dim != nu.dim:
        raise InvalidMeasureError("measures live in different dimensions")
    mu.check_probability()
    nu.check_probability()


def _is_uniform_square(mu, nu) -> bool:
    n = mu.size
    return n == nu.size and np.all(mu.weights == mu.weights[0]) and np.all(nu.weights == nu.weights[0])


def _transport_lp(a, b, C) -> np.ndarray:
    m, n = C.shape
    rows = np.concatenate([np.repeat(np.arange(m), n), m + np.tile(np.arange(n), m)])
    cols = np.concatenate([np.arange(m * n), np.arange(m * n)])
    A = coo_matrix((np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n)).tocsr()
    # the balance equations are rank m+n-1; drop one to keep HiGHS presolve quiet
    res = linprog(C.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise InvalidMeasureError(f"transport LP failed: {res.message}")
    return np.maximum(res.x.reshape(m, n), 0.0)


def wasserstein_exact(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int = 2):
    """Exact ``W_p`` and an optimal coupling.

    Equal-size uniform measures are solved as an assignment problem, everything
    else as a transportation LP with HiGHS.
    """
    _check_pair(mu, nu, p)
    if mu.size + nu.size > EXACT_BUDGET:
        raise BudgetError(f"support sizes {mu.size}+{nu.size} exceed {EXACT_BUDGET}; use wasserstein_sinkhorn")
    C = cost_matrix(mu, nu, p)
    if _is_uniform_square(mu, nu):
        r, c = linear_sum_assignment(C)
        G = np.zeros_like(C)
        G[r, c] = mu.weights[0]
    else:
        G = _transport_lp(mu.weights, nu.weights, C)
    val = max(float(np.sum(G * C)), 0.0)
    return val ** (1.0 / p), Coupling(G)


def enumerate_vertex_couplings(a, b):
    """All vertices of the transportation polytope ``{G >= 0 : G 1 = a, G^T 1 = b}``.

    Each vertex is supported on at most ``m + n - 1`` cells; every subset of that
    size whose balance system has a unique nonnegative solution is a vertex.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = len(a), len(b)
    cells = [(i, j) for i in range(m) for j in range(n)]
    rhs = np.concatenate([a, b])
    out = []
    for subset in itertools.combinations(range(m * n), m + n - 1):
        M = np.zeros((m + n, len(subset)))
        for k, c in enumerate(subset):
            i, j = cells[c]
            M[i, k] = 1.0
            M[m + j, k] = 1.0
        if np.linalg.matrix_rank(M) < len(subset):
            continue
        x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.max(np.abs(M @ x - rhs)) > 1e-12 or np.any(x < -1e-12):
            continue
        G = np.zeros((m, n))
        for k, c in enumerate(subset):
            G[cells[c]] = max(x[k], 0.0)
        out.append(G)
    return out


def wasserstein_bruteforce(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int = 2) -> float:
    """``W_p`` by minimising over every vertex coupling; only for tiny supports."""
    _check_pair(mu, nu, p)
    if mu.size * nu.size > 16:
        raise BudgetError("brute force is limited to supports of product size <= 16")
    C = cost_matrix(mu, nu, p)
    best = min(float(np.sum(G * C)) for G in enumerate_vertex_couplings(mu.weights, nu.weights))
    return max(best, 0.0) ** (1.0 / p)


@dataclass
class SinkhornResult:
    value: float
    cost: float
    coupling: Coupling
    iterations: int
    violation: float
    converged: bool
    label: str = "approximate"

    def to_dict(self) -> dict:
        return {"value": self.value, "cost": self.cost, "iterations": self.iterations,
                "violation": self.violation, "converged": self.converged, "label": self.label}


def wasserstein_sinkhorn(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int = 2, reg: float = 1e-2,
                         max_iter: int = 10_000, tol: float = 1e-8) -> SinkhornResult:
    """Log-domain Sinkhorn.  ``value`` is the transport cost of the entropic plan, rooted."""
    _check_pair(mu, nu, p)
    if reg <= 0:
        raise ValueError("regularization must be positive")
    C = cost_matrix(mu, nu, p)
    a, b = mu.weights, nu.weights
    with np.errstate(divide="ignore"):
        la, lb = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    best = None
    viol = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = reg * (la - logsumexp((g[None, :] - C) / reg, axis=1))
        g = reg * (lb - logsumexp((f[:, None] - C) / reg, axis=0))
        if it % 10 == 0 or it == max_iter:
            G = np.exp((f[:, None] + g[None, :] - C) / reg)
            viol = float(np.abs(G.sum(axis=1) - a).sum())
            if best is None or viol < best[1]:
                best = (G, viol)
            if viol < tol:
                break
    G, viol = best
    cost = max(float(np.sum(G * C)), 0.0)
    return SinkhornResult(cost ** (1.0 / p), cost, Coupling(G), it, viol, viol < tol)


def coupling_from_map(X, f: Callable, g: Callable) -> float:
    """``sqrt(mean ||f(X) - g(X)||^2)``, a ``W_2`` upper bound between ``f#X`` and ``g#X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = np.asarray(f(X), dtype=float).reshape(len(X), -1) - np.asarray(g(X), dtype=float).reshape(len(X), -1)
    return math.sqrt(float(np.mean(np.sum(d * d, axis=1))))


def lipschitz_spot_check(phi: Callable, points: np.ndarray, L: float, pairs: int = 2000, seed: int = 0) -> float:
    """Largest difference quotient of ``phi`` over random pairs (all pairs when few points)."""
    pts = np.atleast_2d(points)
    N = len(pts)
    if N < 2:
        return 0.0
    if N * (N - 1) // 2 <= pairs:
        i, j = np.triu_indices(N, 1)
    else:
        rng = np.random.default_rng(seed)
        i, j = rng.integers(0, N, pairs), rng.integers(0, N, pairs)
    vals = np.asarray(phi(pts), dtype=float).reshape(N)
    dx = np.linalg.norm(pts[i] - pts[j], axis=1)
    ok = dx > 0
    if not ok.any():
        return 0.0
    q = float(np.max(np.abs(vals[i] - vals[j])[ok] / dx[ok]))
    if q > L * (1 + 1e-9) + 1e-12:
        raise InvalidLipschitzError(f"difference quotient {q:.6g} exceeds L = {L}")
    return q


def lipschitz_discrepancy(phi: Callable, L: float, mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    """``(|E_mu phi - E_nu phi|, L W_1(mu, nu))``."""
    lipschitz_spot_check(phi, np.vstack([mu.points, nu.points]), L)
    disc = abs(mu.expect(phi) - nu.expect(phi))
    w1, _ = wasserstein_exact(mu, nu, 1)
    bound = L * w1
    if disc > bound + 1e-9:
        raise AssertionError(f"discrepancy {disc} exceeds L W1 = {bound}")
    return disc, bound


def kr_dual_lower(mu: EmpiricalMeasure, nu: EmpiricalMeasure, candidates: Sequence[Callable]) -> float:
    """Best dual value ``max_phi E_mu phi - E_nu phi`` over 1-Lipschitz candidates; a lower bound on ``W_1``."""
    pts = np.vstack([mu.points, nu.points])
    best = -np.inf
    for phi in candidates:
        lipschitz_spot_check(phi, pts, 1.0)
        best = max(best, mu.expect(phi) - nu.expect(phi))
    return float(best)


def mmd_discrepancy(F: Sequence[Callable], mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    return float(max(abs(mu.expect(f) - nu.expect(f)) for f in F))


def ridge(u, b: float = 0.0, kind: str = "abs") -> Callable:
    """1-Lipschitz ridge ``x -> h(<u, x> + b)`` with unit ``u`` and ``h`` one of abs, identity, tanh."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    h = {"abs": np.abs, "identity": lambda t: t, "tanh": np.tanh}[kind]
    return lambda X: h(np.atleast_2d(X) @ u + b)


def random_measure(rng: np.random.Generator, size: int, dim: int, uniform: bool = False, scale: float = 1.0,
                   shift=0.0) -> EmpiricalMeasure:
    pts = rng.normal(size=(size, dim)) * scale + shift
    if uniform:
        return EmpiricalMeasure.uniform(pts)
    w = rng.random(size) + 0.05
    return EmpiricalMeasure(pts, w / w.sum())
