"""One-hidden-layer sigmoidal networks under an L1 coefficient budget.

``f_k(x) = c0 + sum_i c_i sigma(<a_i, x> + b_i)`` with ``sum |c_i| <= budget``.

Fitting is greedy: each new node maximises the weighted correlation of its
(centred) activation with the current residual, found by random multistart
over directions, scales and thresholds followed by local refinement.  After
every addition all outer coefficients are refit jointly by accelerated
projected gradient onto the L1 ball.  The node prefix is frozen, so errors
are non-increasing in ``k`` and a run with ``k`` nodes is the prefix of any
longer run with the same seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special


class InvalidMeasureError(ValueError):
    pass


class OverfitWarning(UserWarning):
    pass


def _logistic(z):
    return special.expit(z)


def _scaled_tanh(z):
    return 0.5 * (np.tanh(z) + 1.0)


def _relu_difference(z):
    # ReLU(z) - ReLU(z - 1)
    return np.maximum(z, 0.0) - np.maximum(z - 1.0, 0.0)


ACTIVATIONS = {
    "logistic": _logistic,
    "scaledTanh": _scaled_tanh,
    "reluDifference": _relu_difference,
}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass
class TwoLayerNet:
    weights: np.ndarray
    biases: np.ndarray
    coeffs: np.ndarray
    offset: float = 0.0
    activation: str = "logistic"
    budget: float | None = None

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.biases = np.asarray(self.biases, dtype=float).reshape(-1)
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        self.offset = float(self.offset)
        k = self.coeffs.size
        if self.weights.shape[0] != k or self.biases.size != k:
            if k == 0 and self.weights.size == 0:
                self.weights = self.weights.reshape(0, max(self.weights.shape[-1], 1))
            else:
                raise ValueError("weights, biases and coefficients disagree on the node count")
        activation(self.activation)
        for arr in (self.weights, self.biases, self.coeffs):
            if not np.all(np.isfinite(arr)):
                raise ValueError("network parameters must be finite")
        if not math.isfinite(self.offset):
            raise ValueError("offset must be finite")
        if self.budget is not None and self.l1() > self.budget * (1 + 1e-12):
            raise ValueError(f"sum |c_i| = {self.l1()} exceeds the budget {self.budget}")

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def k(self) -> int:
        return self.coeffs.size

    def l1(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def hidden(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return activation(self.activation)(X @ self.weights.T + self.biases)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of dimension {self.input_dim}, got {X2.shape[1]}")
        out = self.offset + self.hidden(X2) @ self.coeffs
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "coeffs": self.coeffs.tolist(),
            "offset": self.offset,
            "activation": self.activation,
            "budget": self.budget,
            "inputDim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoLayerNet":
        w = np.asarray(d["weights"], dtype=float).reshape(-1, int(d.get("inputDim", 1)))
        return cls(w, d["biases"], d["coeffs"], d["offset"], d["activation"], d.get("budget"))

    def __eq__(self, other):
        if not isinstance(other, TwoLayerNet):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.biases, other.biases)
            and np.array_equal(self.coeffs, other.coeffs)
            and self.offset == other.offset
            and self.activation == other.activation
            and self.budget == other.budget
        )


@dataclass
class FitReport:
    error: float
    budget_used: float
    iterations: int
    seed: int
    target_bound: float
    history: list = field(default_factory=list)
    total_weight: float = 1.0

    def to_dict(self) -> dict:
        return {
            "error": self.error,
            "budgetUsed": self.budget_used,
            "iterations": self.iterations,
            "seed": self.seed,
            "targetBound": self.target_bound,
            "history": list(self.history),
            "totalWeight": self.total_weight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        return cls(d["error"], d["budgetUsed"], d["iterations"], d["seed"], d["targetBound"],
                   list(d.get("history", [])), d.get("totalWeight", 1.0))


def eval_net(net: TwoLayerNet, x):
    return net(x)


# ---------------------------------------------------------------------------
# L1-ball projection and the coefficient refit


def project_l1_ball(v: np.ndarray, z: float) -> np.ndarray:
    """Euclidean projection onto ``{c : sum |c| <= z}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    if z <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= z:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    hits = np.nonzero(u * idx > css - z)[0]
    rho = hits[-1] if hits.size else 0
    theta = (css[rho] - z) / (rho + 1.0)
    out = np.sign(v) * np.maximum(a - theta, 0.0)
    s = np.abs(out).sum()
    if s > z:
        out *= z / s
    return out


def _weighted_center(A, w, W):
    return A - (w @ A) / W


def refit_coefficients(Phi, y, w, budget: float, c_init=None, iters: int = 3000, tol: float = 1e-13):
    """Minimise ``sum w (y - c0 - Phi c)^2`` over ``c`` in the L1 ball and free ``c0``.

    FISTA on the Gram system with the offset eliminated by weighted centring.
    Returns the best iterate seen, so a feasible warm start is never worsened.
    """
    W = float(w.sum())
    Pc = _weighted_center(Phi, w, W)
    yc = y - (w @ y) / W
    G = Pc.T @ (w[:, None] * Pc)
    b = Pc.T @ (w * yc)
    const = float(w @ (yc * yc))

    def obj(c):
        return float(c @ G @ c - 2.0 * b @ c + const)

    k = Phi.shape[1]
    c = np.zeros(k) if c_init is None else project_l1_ball(c_init, budget)
    L = 2.0 * max(float(np.linalg.eigvalsh(G)[-1]), 1e-300)
    best_c, best = c.copy(), obj(c)
    z, t = c.copy(), 1.0
    for it in range(iters):
        grad = 2.0 * (G @ z - b)
        c_new = project_l1_ball(z - grad / L, budget)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = c_new + ((t - 1.0) / t_new) * (c_new - c)
        val = obj(c_new)
        if val < best:
            improvement = best - val
            best, best_c = val, c_new.copy()
            if improvement <= tol * max(best, 1e-300) and it > 20:
                break
        if np.max(np.abs(c_new - c)) < 1e-15:
            break
        c, t = c_new, t_new
    offset = float(w @ (y - Phi @ best_c)) / W
    return best_c, offset, max(best, 0.0), it + 1


# ---------------------------------------------------------------------------
# Greedy node selection


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), step]))


def _score(phi, r, w, W, cmax=None):
    """Decrease in weighted squared error from adding one centred node.

    The coefficient is capped at ``cmax`` (the L1 budget), so steep and
    shallow nodes are compared on what the budget actually allows.  With
    ``cmax=None`` this is the squared correlation over the variance.
    """
    pc = phi - (w @ phi) / W
    num = (w @ (r[:, None] * pc)) if phi.ndim == 2 else float(w @ (r * pc))
    den = (w @ (pc * pc)) if phi.ndim == 2 else float(w @ (pc * pc))
    ok = den > 1e-14
    safe = np.where(ok, den, 1.0)
    if cmax is None:
        return np.where(ok, num * num / safe, 0.0)
    c = np.minimum(np.abs(num) / safe, cmax)
    return np.where(ok, 2.0 * c * np.abs(num) - c * c * den, 0.0)


def _candidates(X, r, w, W, sigma, rng, restarts: int, scales, thresholds: int, cmax=None):
    """Score random ridge nodes; returns ``(score, a, b)`` sorted best first."""
    n = X.shape[1]
    dirs = rng.normal(size=(restarts, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    proj = X @ dirs.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    qs = (np.arange(thresholds) + 0.5) / thresholds
    jitter = rng.uniform(-0.5, 0.5, size=(restarts, thresholds)) / thresholds
    cands = []
    for s in scales:
        for q in range(thresholds):
            tau = lo + (qs[q] + jitter[:, q]) * (hi - lo)
            sc = _score(sigma(s * (proj - tau)), r, w, W, cmax)
            for d in range(restarts):
                cands.append((float(sc[d]), s * dirs[d], -s * float(tau[d])))
    cands.sort(key=lambda t: -t[0])
    return cands


def _refine(X, r, w, W, sigma, cands, refine: int, cmax=None):
    n = X.shape[1]

    def neg(p):
        return -float(_score(sigma(X @ p[:n] + p[n]), r, w, W, cmax))

    best_val, best_p = -np.inf, None
    if refine < 1:
        v, a, b = cands[0]
        return a, b, v
    for _, a, b in cands[:refine]:
        p0 = np.concatenate([a, [b]])
        v0 = -neg(p0)
        res = optimize.minimize(neg, p0, method="L-BFGS-B", options={"maxiter": 60})
        if np.all(np.isfinite(res.x)) and -res.fun > v0:
            p, v = res.x, -res.fun
        else:
            p, v = p0, v0
        if v > best_val:
            best_val, best_p = v, p
    return best_p[:n], float(best_p[n]), best_val


def _search(X, r, w, W, sigma, rng, restarts, scales, thresholds, refine, search_samples, cmax=None):
    N, n = X.shape
    if search_samples is not None and N > search_samples:
        idx = np.sort(rng.choice(N, size=search_samples, replace=False, p=w / W))
        Xs, rs, ws = X[idx], r[idx], np.full(search_samples, 1.0 / search_samples)
        cands = _candidates(Xs, rs, ws, 1.0, sigma, rng, restarts, scales, thresholds, cmax)
    else:
        cands = _candidates(X, r, w, W, sigma, rng, restarts, scales, thresholds, cmax)
    a, b, _ = _refine(X, r, w, W, sigma, cands, refine, cmax)
    return a, b


def fit_two_layer(
    X,
    y,
    w=None,
    C: float = 1.0,
    k: int = 8,
    activation_name: str = "logistic",
    seed: int = 0,
    restarts: int = 64,
    scales=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
    thresholds: int = 16,
    refine: int = 3,
    search_samples: int | None = 2000,
):
    """Greedy fit of ``k`` nodes with ``sum |c_i| <= 2C``.

    ``w`` are sample weights (default uniform ``1/N``); they may sum to less
    than one.  ``FitReport.error`` is ``sum w (y - f_k)^2`` and ``history``
    holds the error after each added node.  Candidate nodes are scored on at
    most ``search_samples`` points (drawn per step); refinement and the
    coefficient refit use every sample.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and np.ndim(y) and np.size(y) > 1:
        X = X.T
    y = np.asarray(y, dtype=float).reshape(-1)
    N, n = X.shape
    if y.size != N:
        raise ValueError("one target per sample is required")
    w = np.full(N, 1.0 / N) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidMeasureError("weights must be finite and nonnegative")
    W = float(w.sum())
    if W <= 0:
        raise InvalidMeasureError("total weight is zero")
    if W > 1 + 1e-9:
        raise InvalidMeasureError(f"weights sum to {W} > 1")
    if k < 1:
        raise ValueError("need at least one node")
    if C < 0:
        raise ValueError("C must be nonnegative")
    if k * n > 10 * N:
        warnings.warn(f"{k * n} inner parameters for {N} samples", OverfitWarning, stacklevel=2)
    sigma = activation(activation_name)
    budget = 2.0 * C

    weights = np.zeros((0, n))
    biases = np.zeros(0)
    coeffs = np.zeros(0)
    offset = float(w @ y) / W
    Phi = np.zeros((N, 0))
    err = float(w @ (y - offset) ** 2)
    history = []
    iters = 0
    for step in range(k):
        r = y - offset - Phi @ coeffs
        if err <= 1e-30:
            # nothing left to fit; pad with an inert node
            weights = np.vstack([weights, np.zeros(n)])
            biases = np.append(biases, 0.0)
            Phi = np.column_stack([Phi, sigma(np.zeros(N))])
            coeffs = np.append(coeffs, 0.0)
            history.append(err)
            continue
        rng = _step_rng(seed, step)
        a, b = _search(X, r, w, W, sigma, rng, restarts, scales, thresholds, refine, search_samples, budget)
        weights = np.vstack([weights, a])
        biases = np.append(biases, b)
        Phi = np.column_stack([Phi, sigma(X @ a + b)])
        c_init = np.append(coeffs, 0.0)
        prev = err
        coeffs, offset, err, it = refit_coefficients(Phi, y, w, budget, c_init)
        err = min(err, prev)
        iters += it
        history.append(err)
    net = TwoLayerNet(weights, biases, coeffs, offset, activation_name, budget)
    final = float(w @ (y - net(X)) ** 2)
    report = FitReport(final, net.l1(), iters, int(seed), budget**2 / k, history, W)
    return net, report


def vector_fit(X, Y, w=None, C: float = 1.0, k: int = 8, activation_name: str = "logistic", seed: int = 0,
               **kwargs):
    """Independent scalar fits per output component.

    Component ``j`` uses seed ``seed + j``; the aggregate is
    ``sqrt(sum_j error_j)``, the L2(mu) norm of the vector residual.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    nets, reports = [], []
    for j in range(Y.shape[1]):
        net, rep = fit_two_layer(X, Y[:, j], w, C, k, activation_name, (int(seed) + j) % 2**64, **kwargs)
        nets.append(net)
        reports.append(rep)
    aggregate = math.sqrt(sum(r.error for r in reports))
    return nets, reports, aggregate


def eval_vector(nets, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([net(X) for net in nets])


def measure_transfer_probe(net: TwoLayerNet, f, X1, w1, X2, w2) -> dict:
    """Weighted MSE of one net under two sample measures (no claim of transfer)."""
    out = {}
    for name, X, w in (("mu1", X1, w1), ("mu2", X2, w2)):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = np.full(len(X), 1.0 / len(X)) if w is None else np.asarray(w, dtype=float)
        out[name] = float(w @ (np.asarray(f(X)) - net(X)) ** 2)
    return out


def loglog_slope(ks, errors) -> float:
    lk = np.log(np.asarray(ks, dtype=float))
    le = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(lk, le, 1)[0])


def uniform_ball(rng: np.random.Generator, N: int, n: int, radius: float = 1.0) -> np.ndarray:
    """``N`` points uniform in the ``n``-ball."""
    g = rng.normal(size=(N, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius * g * rng.uniform(size=(N, 1)) ** (1.0 / n)
