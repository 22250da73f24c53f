"""Figure rendering for the command-line report path.

Everything here draws from already-computed data and writes a file;
nothing is interactive.  The Agg backend is forced so the commands work
headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "plot_graph",
    "plot_intervals",
    "plot_reports",
    "plot_fixed_points",
    "plot_threshold_curve",
    "plot_parameter_sweep",
]

_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_graph(graph, path, title=""):
    """Height field of the graph: curve for one base dimension, heatmap
    for two, mid-slice heatmap beyond that."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if graph.m == 1:
        z = graph.z_axes[0]
        for i in range(graph.n):
            ax.plot(z, graph.h_values[:, i], label=f"h{i}")
        ax.set_xlabel("z0")
        ax.set_ylabel("h")
        if graph.n > 1:
            ax.legend(frameon=False)
    else:
        h = graph.h_values
        # freeze every axis beyond the first two at its middle sample
        for _ in range(graph.m - 2):
            h = h[:, :, h.shape[2] // 2] if h.ndim > 3 else h
        mesh = ax.pcolormesh(graph.z_axes[1], graph.z_axes[0], h[..., 0],
                             shading="auto")
        fig.colorbar(mesh, ax=ax, label="h0")
        ax.set_xlabel("z1")
        ax.set_ylabel("z0")
    ax.set_title(title or (graph.name or "graph height"))
    fig.tight_layout()
    return _save(fig, path)


def plot_intervals(intervals, path, title="feasible parameter intervals"):
    """Horizontal bar per order r; empty rows are marked, not drawn."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for iv in intervals:
        if iv.empty:
            ax.plot([], [])
            ax.annotate("empty", (0.02, iv.r), fontsize=8, va="center")
            continue
        ax.plot([iv.lo, iv.hi], [iv.r, iv.r], lw=4, solid_capstyle="butt")
    rs = [iv.r for iv in intervals]
    ax.set_yticks(rs)
    ax.set_ylim(min(rs) - 0.5, max(rs) + 0.5)
    ax.invert_yaxis()
    ax.set_xlabel("beta")
    ax.set_ylabel("order r")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_reports(reports, path, title="check margins"):
    """One bar per check report, signed margin, pass/fail colored."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ids = [r.inequality_id for r in reports]
    margins = [r.margin for r in reports]
    colors = ["tab:blue" if r.passed else "tab:red" for r in reports]
    ax.barh(np.arange(len(ids)), margins, color=colors)
    ax.set_yticks(np.arange(len(ids)))
    ax.set_yticklabels(ids, fontsize=8)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("margin")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_fixed_points(field, domain, infos, path,
                      title="phase portrait and equilibria"):
    """Streamlines of a planar (1+1) system with its equilibria marked."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    a_lo, a_hi = domain.a_bounds[0]
    zb = domain.z_bounds[0]
    z_hi = zb.period if zb.period else zb.hi
    z_lo = 0.0 if zb.period else zb.lo
    zg, ag = np.meshgrid(np.linspace(z_lo, z_hi, 41),
                         np.linspace(a_lo, a_hi, 41))
    A = ag.reshape(-1, 1)
    Z = zg.reshape(-1, 1)
    U = field.g(A, Z)[:, 0].reshape(ag.shape)
    V = field.f(A, Z)[:, 0].reshape(ag.shape)
    ax.streamplot(zg, ag, U, V, density=1.1, linewidth=0.6, color="0.6")
    for fp in infos:
        w, theta = fp.point
        ax.plot(theta, w, "o", ms=7,
                color="tab:red" if fp.classification == "saddle"
                else "tab:blue")
        ax.annotate(fp.classification, (theta, w),
                    textcoords="offset points", xytext=(6, 6), fontsize=8)
    ax.set_xlabel("theta")
    ax.set_ylabel("w")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_threshold_curve(eps, k_eps, kappa, eps_star, path,
                         title="balanced scaling and rate gap"):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax1.loglog(eps, k_eps)
    ax1.set_ylabel("k(eps)")
    ax2.semilogx(eps, kappa)
    ax2.axhline(0.0, color="k", lw=0.8)
    ax2.axvline(eps_star, color="tab:red", lw=0.8, ls="--",
                label=f"eps* = {eps_star:.4g}")
    ax2.legend(frameon=False, fontsize=8)
    ax2.set_xlabel("eps")
    ax2.set_ylabel("rate gap")
    ax1.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_parameter_sweep(betas, omegas, orders, path,
                         title="certified order over the parameter plane"):
    """Heatmap of the certified order on the (beta, omega) lattice."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    orders = np.asarray(orders, dtype=float)
    mesh = ax.pcolormesh(betas, omegas, orders.T, shading="auto")
    fig.colorbar(mesh, ax=ax, label="certified order")
    ax.set_xlabel("beta")
    ax.set_ylabel("omega")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
