"""Figures for the experiment runners.  Always renders off-screen with Agg."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}
# fixed metadata keeps the PNG bytes reproducible
PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)
    return path


def plot_fit_scaling(k, mse, bound, path, slope=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(k, mse, "o-", label="weighted MSE")
        ax.loglog(k, bound, "k--", label=r"$(2\hat C)^2/k$")
        ax.set_xlabel("hidden units k")
        ax.set_ylabel("error")
        if slope is not None:
            ax.set_title(f"log-log slope {slope:.2f}")
        ax.legend()
        return _save(fig, path)


def plot_separation(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for n in sorted({r["n"] for r in rows}):
            sub = sorted((r for r in rows if r["n"] == n), key=lambda r: r["C3"])
            ax.semilogy([r["C3"] for r in sub], [r["ratio"] for r in sub], "o-", label=f"n = {n}")
        ax.axhline(1.0, color="k", lw=0.8, ls=":")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("C3")
        ax.set_ylabel("lower / (upper_sq + upper_1d)")
        ax.legend()
        return _save(fig, path)


def plot_sinkhorn(reg, approx, exact, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogx(reg, approx, "o-", label="Sinkhorn")
        ax.axhline(exact, color="k", ls="--", label="exact")
        ax.set_xlabel("regularization")
        ax.set_ylabel("W")
        ax.legend()
        return _save(fig, path)


def plot_compose(rows, path):
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(7.5, 3.2))
        layers = [r["layer"] for r in rows]
        a1.bar(layers, [r["fit_rms"] for r in rows])
        a1.set_xlabel("layer")
        a1.set_ylabel("fit RMS")
        w = 0.38
        x = np.asarray(layers, dtype=float)
        a2.bar(x - w / 2, [r["excluded_frac"] for r in rows], w, label="empirical")
        a2.bar(x + w / 2, [r["excluded_bound"] for r in rows], w, label="bound")
        a2.set_xlabel("layer")
        a2.set_ylabel("excluded mass")
        a2.legend()
        return _save(fig, path)


def plot_ft_check(rho, grid, radial, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(rho, grid, "o", ms=4, label="grid")
        ax.plot(rho, radial, "-", label="radial")
        ax.set_xlabel(r"$\|\omega\|$")
        ax.set_ylabel(r"$\hat f$")
        ax.legend()
        return _save(fig, path)


def plot_sandwich(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = [r["case"] for r in rows]
        x = np.arange(len(rows))
        ax.semilogy(x, [r["lower"] for r in rows], "v", label="lower")
        ax.semilogy(x, [r["upper"] for r in rows], "^", label="upper")
        ax.set_xticks(x, names, rotation=20)
        ax.set_ylabel("Barron constant")
        ax.legend()
        return _save(fig, path)
