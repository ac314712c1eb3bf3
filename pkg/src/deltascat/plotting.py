"""Figures for the CLI report path, written to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "lines.linewidth": 1.3,
    "axes.grid": True,
    "grid.linewidth": 0.3,
    "grid.alpha": 0.5,
    "font.size": 10,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(table, fit=None, path="sweep.png", axis: str = "abs") -> Path:
    """Log-log norm and Schur bound against the spectral parameter, with the fitted power law."""
    lam = np.array([r.lam for r in table.rows if r.ok], dtype=complex)
    x = {"abs": np.abs(lam), "real": lam.real, "imag": lam.imag}[axis]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.loglog(x, [r.norm for r in table.rows if r.ok], "o-", label="operator norm")
        ax.loglog(x, [r.schur for r in table.rows if r.ok], "s--", ms=3, label="Schur bound")
        if fit is not None and len(x):
            y0 = table.norms[np.isfinite(table.norms)][0]
            ax.loglog(x, y0 * (x / x[0]) ** fit.alpha, ":", color="k",
                      label=f"slope {fit.alpha:.3f}")
        ax.set_xlabel(r"$|\lambda|$" if axis == "abs" else rf"$\mathrm{{{axis[:2].title()}}}\,\lambda$")
        ax.set_ylabel(r"$\|G(\lambda)\|$")
        ax.legend()
        return _save(fig, path)


def plot_resonances(rset, path="resonances.png", threshold=None) -> Path:
    """Resonances in the complex plane, with an optional free-region curve ``(x, y(x))``."""
    lam = rset.lambdas
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.plot(lam.real, lam.imag, "o", ms=3, label="resonances")
        if threshold is not None:
            xs, ys = threshold
            ax.plot(xs, ys, "-", color="C3", label="free-region bound")
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel(r"Re $\lambda$")
        ax.set_ylabel(r"Im $\lambda$")
        ax.legend()
        return _save(fig, path)


def plot_wave(result, path="wave.png") -> Path:
    """Field against expansion at the last snapshot, and error history."""
    traj, exp, table = result.trajectory, result.expansion, result.table
    m = np.abs(traj.x) <= table.chi_radius + 1e-12
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.4))
        t = traj.times[-1]
        a1.plot(traj.x[m], traj.snapshots[-1][m], label="leapfrog")
        a1.plot(exp.x, exp(t)[0].real, "--", label="expansion")
        a1.set_xlabel("x")
        a1.set_title(f"t = {t:g}")
        a1.legend()
        err = table.errors
        a2.semilogy(table.times, np.where(err > 0, err, np.nan), "o-", label="L2 error")
        a2.semilogy(table.times, table.trajectory_norms, "s--", ms=3, label="field norm")
        a2.set_xlabel("t")
        a2.legend()
        return _save(fig, path)
