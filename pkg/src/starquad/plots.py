"""Figure rendering for rules and convergence reports (file output only)."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .nodes import (  # noqa: E402
    PROVENANCE_CENTER,
    PROVENANCE_FILL,
    PROVENANCE_INTERIOR,
    PROVENANCE_LATTICE,
)

_PROVENANCE_COLORS = {
    PROVENANCE_CENTER: "tab:blue",
    PROVENANCE_LATTICE: "tab:orange",
    PROVENANCE_INTERIOR: "tab:red",
    PROVENANCE_FILL: "tab:green",
}


def convergence_figure(report, path):
    """Log-log plot of the fooling error against the asymptotic bound."""
    rows = [r for r in report.rows if r.fooling_error > 0]
    if not rows:
        raise ValueError("report has no usable rows to plot")
    n = np.array([r.n for r in rows], dtype=float)
    err = np.array([r.fooling_error for r in rows])
    bound = np.array([r.theorem_bound for r in rows])

    fig, (ax, ax2) = plt.subplots(
        1, 2, figsize=(9.0, 3.6), constrained_layout=True
    )
    ax.loglog(n, err, "o-", label="fooling error")
    ax.loglog(n, bound, "s--", label="asymptotic bound")
    ax.set_xlabel("n")
    ax.set_ylabel("error")
    ax.set_title(
        f"{report.domain_id}, p = {report.p} (fitted slope {report.slope:.3f})"
    )
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()

    ax2.semilogx(n, err / bound, "o-")
    ax2.axhline(1.0, color="grey", lw=0.8)
    ax2.set_xlabel("n")
    ax2.set_ylabel("error / bound")
    ax2.set_title("ratio to the bound")
    ax2.grid(True, which="both", alpha=0.3)

    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def rule_figure(rule, dom, path, max_nodes: int = 20_000):
    """Scatter of a 2-D rule: nodes colored by provenance, sized by weight."""
    if rule.d != 2:
        raise ValueError("rule figures are available for d = 2 only")
    fig, ax = plt.subplots(figsize=(5.2, 5.2), constrained_layout=True)

    if dom is not None:
        theta = np.linspace(0.0, 2.0 * np.pi, 2048)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        pts = dom.boundary_points(dirs)
        ax.plot(pts[:, 0], pts[:, 1], "k-", lw=1.0)

    stride = max(1, len(rule) // max_nodes)
    w = rule.weights[::stride]
    sizes = 4.0 + 40.0 * w / w.max() if w.max() > 0 else 8.0
    for tag, color in _PROVENANCE_COLORS.items():
        mask = np.array([t == tag for t in rule.provenance[::stride]])
        if not mask.any():
            continue
        ax.scatter(
            rule.nodes[::stride][mask, 0],
            rule.nodes[::stride][mask, 1],
            s=np.asarray(sizes)[mask] if np.ndim(sizes) else sizes,
            c=color,
            label=tag,
            alpha=0.8,
            linewidths=0,
        )
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_title(f"{len(rule)} nodes, sum of weights {rule.sum_weights:.6f}")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
