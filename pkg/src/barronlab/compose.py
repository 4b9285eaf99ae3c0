"""Layer-by-layer construction of a deep sigmoidal approximant of ``f_l o ... o f_1``.

Layer ``i`` is fit componentwise on the pushforward of the base samples
through the already-built layers, restricted to the survivors whose images
stay within distance ``s`` of ``K_{i-1}``.  Linear output maps are folded into
the next layer's input weights so the result has exactly ``l`` hidden layers.
Every ``K_i`` is an origin-centred ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .netfit import TwoLayerNet, activation, uniform_ball, vector_fit


class DegenerateMarginError(RuntimeError):
    pass


class AssumptionError(ValueError):
    pass


@dataclass
class LayerSpec:
    f: Callable
    in_dim: int
    out_dim: int
    radius: float          # K_i = ball(radius) contains f_i(K_{i-1})
    C: float               # Barron bound per component on K_{i-1} + sB
    lip_bound: float = 1.0
    C_source: str = "analytic"

    def __post_init__(self):
        if self.lip_bound > 1.0:
            raise AssumptionError("layer maps must be 1-Lipschitz")
        if self.radius <= 0 or self.C < 0:
            raise AssumptionError("radius must be positive and C nonnegative")


@dataclass
class ComposePlan:
    depth: int
    s: float
    eps: float
    base_radius: float
    in_dim: int
    sample_count: int
    C: list
    out_dims: list
    diameter: float
    activation: str = "logistic"

    def __post_init__(self):
        if self.s <= 0 or self.eps <= 0:
            raise AssumptionError("s and eps must be positive")
        if len(self.C) != self.depth or len(self.out_dims) != self.depth:
            raise AssumptionError("need one C and one output dimension per layer")

    @property
    def node_counts(self) -> list:
        """Nodes per output component of each layer, ``ceil(4 C_i^2 m_i / eps^2)``."""
        return [int(math.ceil(4.0 * c * c * m / self.eps**2)) for c, m in zip(self.C, self.out_dims)]

    def to_dict(self) -> dict:
        return {
            "depth": self.depth, "s": self.s, "eps": self.eps, "baseRadius": self.base_radius,
            "inDim": self.in_dim, "sampleCount": self.sample_count, "C": list(self.C),
            "outDims": list(self.out_dims), "diameter": self.diameter, "activation": self.activation,
            "nodeCounts": self.node_counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComposePlan":
        return cls(d["depth"], d["s"], d["eps"], d["baseRadius"], d["inDim"], d["sampleCount"],
                   list(d["C"]), list(d["outDims"]), d["diameter"], d.get("activation", "logistic"))

    @classmethod
    def for_layers(cls, layers: Sequence[LayerSpec], s: float, eps: float, base_radius: float,
                   sample_count: int = 10_000, activation: str = "logistic") -> "ComposePlan":
        return cls(len(layers), s, eps, base_radius, layers[0].in_dim, sample_count,
                   [ly.C for ly in layers], [ly.out_dim for ly in layers], 2.0 * layers[-1].radius, activation)


def base_sample(plan: ComposePlan, seed: int, N: int | None = None) -> np.ndarray:
    """``N`` draws from the uniform base measure on ``ball(base_radius)``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 0]))
    return uniform_ball(rng, plan.sample_count if N is None else N, plan.in_dim, plan.base_radius)


def layer_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), 1, i]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Networks


def _stack(nets: Sequence[TwoLayerNet]):
    """Hidden weights/biases of all components plus the block output map."""
    A = np.vstack([n.weights for n in nets])
    b = np.concatenate([n.biases for n in nets])
    V = np.zeros((len(nets), A.shape[0]))
    pos = 0
    for j, n in enumerate(nets):
        V[j, pos:pos + n.k] = n.coeffs
        pos += n.k
    c0 = np.array([n.offset for n in nets])
    return A, b, V, c0


@dataclass
class LayeredNet:
    blocks: list                      # list of lists of TwoLayerNet, one list per layer
    shift: np.ndarray = None
    activation: str = "logistic"
    hidden_weights: list = field(init=False)
    hidden_biases: list = field(init=False)
    out_matrix: np.ndarray = field(init=False)
    out_offset: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("need at least one layer")
        for prev, cur in zip(self.blocks, self.blocks[1:]):
            if cur[0].input_dim != len(prev):
                raise ValueError("layer dimensions do not chain")
        if self.shift is None:
            self.shift = np.zeros(len(self.blocks[-1]))
        self.shift = np.asarray(self.shift, dtype=float)
        self._collapse()

    def _collapse(self):
        Ws, bs = [], []
        V_prev = c_prev = None
        for nets in self.blocks:
            A, b, V, c0 = _stack(nets)
            if V_prev is None:
                Ws.append(A)
                bs.append(b)
            else:
                Ws.append(A @ V_prev)
                bs.append(A @ c_prev + b)
            V_prev, c_prev = V, c0
        self.hidden_weights, self.hidden_biases = Ws, bs
        self.out_matrix, self.out_offset = V_prev, c_prev

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @property
    def widths(self) -> list:
        return [W.shape[0] for W in self.hidden_weights]

    def __call__(self, X) -> np.ndarray:
        """Collapsed evaluation: ``l`` sigmoidal hidden layers and one linear output."""
        sigma = activation(self.activation)
        h = np.atleast_2d(np.asarray(X, dtype=float))
        for W, b in zip(self.hidden_weights, self.hidden_biases):
            h = sigma(h @ W.T + b)
        return h @ self.out_matrix.T + self.out_offset + self.shift

    def stages(self, X) -> list:
        """Outputs of ``g_{i:1}`` for ``i = 1..l`` by chaining the blocks (shift on the last)."""
        h = np.atleast_2d(np.asarray(X, dtype=float))
        out = []
        for nets in self.blocks:
            h = np.column_stack([n(h) for n in nets])
            out.append(h)
        out[-1] = out[-1] + self.shift
        return out

    def chained(self, X) -> np.ndarray:
        return self.stages(X)[-1]

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "shift": self.shift.tolist(),
            "blocks": [[n.to_dict() for n in nets] for nets in self.blocks],
            "widths": self.widths,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayeredNet":
        blocks = [[TwoLayerNet.from_dict(n) for n in nets] for nets in d["blocks"]]
        return cls(blocks, np.asarray(d["shift"]), d["activation"])


# ---------------------------------------------------------------------------
# Construction


@dataclass
class ErrorLedger:
    fit_rms: list
    excluded_frac: list
    excluded_bound: list
    slack: list
    survivors: list
    markov: list
    onS_rms: float
    unconditional_rms: float
    bound: float
    range_bound: float
    range_fitted: float
    C_source: list
    spot_checks: list

    def to_dict(self) -> dict:
        return {
            "fitRms": self.fit_rms, "excludedFrac": self.excluded_frac, "excludedBound": self.excluded_bound,
            "slack": self.slack, "survivors": self.survivors, "markov": self.markov,
            "onSRms": self.onS_rms, "unconditionalRms": self.unconditional_rms, "bound": self.bound,
            "rangeBound": self.range_bound, "rangeFitted": self.range_fitted,
            "CSource": self.C_source, "spotChecks": self.spot_checks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorLedger":
        return cls(d["fitRms"], d["excludedFrac"], d["excludedBound"], d["slack"], d["survivors"], d["markov"],
                   d["onSRms"], d["unconditionalRms"], d["bound"], d["rangeBound"], d["rangeFitted"],
                   d["CSource"], d["spotChecks"])

    def rows(self) -> list:
        return [
            {"layer": i + 1, "fit_rms": self.fit_rms[i], "excluded_frac": self.excluded_frac[i],
             "excluded_bound": self.excluded_bound[i]}
            for i in range(len(self.fit_rms))
        ]


def exclusion_bound(layer: int, eps: float, s: float) -> float:
    """``(sum_{i<layer} i^2) eps^2 / s^2``."""
    return sum(i * i for i in range(1, layer)) * eps**2 / s**2


def binomial_slack(p: float, N: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return 3.0 * math.sqrt(p * (1.0 - p) / N)


def error_bound(plan: ComposePlan) -> float:
    """``l eps sqrt((2 C_l sqrt(m_l) + D)^2 l / (3 s^2) + 1)``."""
    l = plan.depth
    R = 2.0 * plan.C[-1] * math.sqrt(plan.out_dims[-1]) + plan.diameter
    return l * plan.eps * math.sqrt(R * R * l / (3.0 * plan.s**2) + 1.0)


def _spot_check(layer: LayerSpec, X: np.ndarray, rng: np.random.Generator, pairs: int = 500) -> dict:
    i = rng.integers(0, len(X), size=(pairs, 2))
    a, b = X[i[:, 0]], X[i[:, 1]]
    fa, fb = np.asarray(layer.f(a)), np.asarray(layer.f(b))
    dx = np.linalg.norm(a - b, axis=1)
    df = np.linalg.norm(np.atleast_2d(fa - fb).reshape(pairs, -1), axis=1)
    ok = dx > 0
    lip = float(np.max(df[ok] / dx[ok])) if ok.any() else 0.0
    reach = float(np.max(np.linalg.norm(np.asarray(layer.f(X)).reshape(len(X), -1), axis=1)))
    if lip > layer.lip_bound * (1 + 1e-9):
        raise AssumptionError(f"Lipschitz spot check failed: {lip:.4g} > {layer.lip_bound}")
    if reach > layer.radius * (1 + 1e-9):
        raise AssumptionError(f"layer image leaves K_i: {reach:.4g} > {layer.radius}")
    return {"lipschitz": lip, "reach": reach}


def _as_matrix(v, N):
    return np.asarray(v, dtype=float).reshape(N, -1)


def build_layered(plan: ComposePlan, layers: Sequence[LayerSpec], seed: int, **fit_kwargs):
    """Fit every layer on the filtered pushforward and return ``(LayeredNet, ErrorLedger, state)``.

    ``state`` holds the training samples, survivor masks and the true and fitted
    stage outputs for later diagnostics.
    """
    if len(layers) != plan.depth:
        raise AssumptionError("plan depth and layer count differ")
    dims = [plan.in_dim] + [ly.out_dim for ly in layers]
    for ly, din, dout in zip(layers, dims[:-1], dims[1:]):
        if ly.in_dim != din or ly.out_dim != dout:
            raise AssumptionError("layer dimensions do not chain")
    N = plan.sample_count
    X = base_sample(plan, seed)
    w = np.full(N, 1.0 / N)
    check_rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 2]))
    radii = [plan.base_radius] + [ly.radius for ly in layers]

    F_prev, G_prev = X, X
    survive = np.ones(N, dtype=bool)
    masks, blocks = [], []
    fit_rms, excl, excl_b, slack, surv, markov, checks = [], [], [], [], [], [], []
    true_stages, fit_stages = [], []
    for i, ly in enumerate(layers, start=1):
        checks.append(_spot_check(ly, F_prev, check_rng))
        if i > 1:
            dev = np.linalg.norm(F_prev - G_prev, axis=1)
            prev = survive.copy()
            mse_prev = float(np.sum(w[prev] * dev[prev] ** 2))
            survive = survive & (np.linalg.norm(G_prev, axis=1) <= radii[i - 1] + plan.s)
            p_far = float(np.sum(w[prev] * (dev[prev] >= plan.s)))
            markov.append({"layer": i, "far_fraction": p_far, "markov_bound": mse_prev / plan.s**2,
                           "slack": binomial_slack(mse_prev / plan.s**2, N)})
        if not survive.any():
            raise DegenerateMarginError(f"no samples survive at layer {i}; increase s or decrease eps")
        masks.append(survive.copy())
        frac = 1.0 - float(survive.mean())
        bnd = exclusion_bound(i, plan.eps, plan.s)
        excl.append(frac)
        excl_b.append(bnd)
        slack.append(binomial_slack(bnd, N))
        surv.append(int(survive.sum()))

        Xin = G_prev[survive]
        Y = _as_matrix(ly.f(Xin), len(Xin))
        k = plan.node_counts[i - 1]
        nets, reps, agg = vector_fit(Xin, Y, w[survive], ly.C, k, plan.activation, layer_seed(seed, i), **fit_kwargs)
        blocks.append(nets)
        fit_rms.append(agg)

        F_prev = _as_matrix(ly.f(F_prev), N)
        G_prev = np.column_stack([n(G_prev) for n in nets])
        true_stages.append(F_prev)
        fit_stages.append(G_prev)

    net = LayeredNet(blocks, None, plan.activation)
    shift = recentering_shift(net, X[survive], F_prev[survive], w[survive])
    G_final = G_prev + shift
    fit_stages[-1] = G_final
    res = np.linalg.norm(F_prev - G_final, axis=1)
    onS = math.sqrt(float(np.sum(w[survive] * res[survive] ** 2)))
    uncond = math.sqrt(float(np.mean(res**2)))
    range_bound = 2.0 * plan.C[-1] * math.sqrt(plan.out_dims[-1]) + plan.diameter
    range_fitted = min(range_bound, output_diameter_bound(net) + plan.diameter)
    ledger = ErrorLedger(fit_rms, excl, excl_b, slack, surv, markov, onS, uncond, error_bound(plan),
                         range_bound, range_fitted, [ly.C_source for ly in layers], checks)
    state = {"X": X, "masks": masks, "true": true_stages, "fit": fit_stages, "weights": w}
    return net, ledger, state


def recentering_shift(net: LayeredNet, X, targets, weights=None) -> np.ndarray:
    """Add to ``net.shift`` the weighted mean residual of ``targets - net(X)`` and return the new shift.

    ``X`` and ``targets`` are the surviving samples and ``f_{l:1}`` on them.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise DegenerateMarginError("no surviving samples to recentre on")
    T = np.asarray(targets, dtype=float).reshape(len(X), -1)
    w = np.full(len(X), 1.0 / len(X)) if weights is None else np.asarray(weights, dtype=float)
    k = w @ (T - net(X)) / w.sum()
    net.shift = np.asarray(net.shift, dtype=float) + k
    return net.shift.copy()


def output_diameter_bound(net: LayeredNet) -> float:
    """Certified diameter of the range of ``net``: each component moves by at most ``sum |c|``."""
    spans = np.abs(net.out_matrix).sum(axis=1)
    return float(np.sqrt(np.sum(spans**2)))


def survivor_mask(net: LayeredNet, X, radii: Sequence[float], s: float) -> np.ndarray:
    """Apply the training filter to new samples: ``g_{i-1:1}(x)`` within ``K_{i-1} + sB`` for ``i >= 2``."""
    stages = net.stages(X)
    keep = np.ones(len(stages[0]), dtype=bool)
    for i in range(2, net.depth + 1):
        keep &= np.linalg.norm(stages[i - 2], axis=1) <= radii[i - 1] + s
    return keep


def compose_all(layers: Sequence[LayerSpec], X) -> np.ndarray:
    h = np.atleast_2d(np.asarray(X, dtype=float))
    for ly in layers:
        h = _as_matrix(ly.f(h), len(h))
    return h


def measured_error(net: LayeredNet, layers: Sequence[LayerSpec], plan: ComposePlan, X) -> dict:
    """On-survivor and unconditional RMS of ``f_{l:1} - g`` on fresh samples."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    radii = [plan.base_radius] + [ly.radius for ly in layers]
    keep = survivor_mask(net, X, radii, plan.s)
    res = np.linalg.norm(compose_all(layers, X) - net(X), axis=1)
    N = len(X)
    return {
        "onS_rms": math.sqrt(float(np.sum(res[keep] ** 2)) / N),
        "unconditional_rms": math.sqrt(float(np.mean(res**2))),
        "excluded_frac": 1.0 - float(keep.mean()),
        "bound": error_bound(plan),
    }


def wasserstein_certificate(net: LayeredNet, layers: Sequence[LayerSpec], plan: ComposePlan, X,
                            max_points: int = 500) -> dict:
    """Pushforward-coupling bound and exact empirical ``W2`` on the first ``max_points`` samples."""
    from .transport import EmpiricalMeasure, coupling_from_map, wasserstein_exact

    X = np.atleast_2d(np.asarray(X, dtype=float))[:max_points]
    F = compose_all(layers, X)
    G = net(X)
    coupling = coupling_from_map(X, lambda Z: compose_all(layers, Z), net)
    exact, _ = wasserstein_exact(EmpiricalMeasure.uniform(F), EmpiricalMeasure.uniform(G), 2)
    return {"coupling": coupling, "exact": exact, "bound": error_bound(plan), "points": len(X)}


# ---------------------------------------------------------------------------
# Standard two-layer chain in the plane


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def sine_chain(s: float = 0.5, a1: float = 0.5, a2: float = 0.8, theta: float = 0.6) -> list:
    """Two 1-Lipschitz sine layers on the plane with analytic per-component Barron bounds.

    ``f1(x) = a1 sin(x)`` componentwise and ``f2(y) = a2 sin(R y)`` with a rotation
    ``R``.  A ridge ``amp * sin(<u, x>)`` with unit ``u`` has Barron constant
    ``amp * r`` on ``ball(r)``.
    """
    R = rotation(theta)
    r0 = 1.0
    r1 = a1 * math.sqrt(2.0) * math.sin(r0)
    r2 = a2 * math.sqrt(2.0) * math.sin(r1)

    def f1(X):
        return a1 * np.sin(np.atleast_2d(X))

    def f2(Y):
        return a2 * np.sin(np.atleast_2d(Y) @ R.T)

    return [
        LayerSpec(f1, 2, 2, r1 * (1 + 1e-9), a1 * (r0 + s), a1),
        LayerSpec(f2, 2, 2, r2 * (1 + 1e-9), a2 * (r1 + s), a2),
    ]
