"""The two canonical charts, written as standalone SVG.

Figures are built with the object API (no pyplot state), so scenarios can
be plotted from worker threads.  Each function returns the arrays it drew.
"""

import numpy as np
from matplotlib import rcParams
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

# fixed element ids, so reruns produce identical files
rcParams["svg.hashsalt"] = "ppalab"


def _save(fig, path):
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_distances(indices, distances, path, title="d(x_n, S)"):
    """Semilog plot of the distance to S; zero distances cannot be drawn and
    are left out.  Returns the plotted (n, d) arrays."""
    n = np.asarray(indices, dtype=float)
    d = np.asarray(distances, dtype=float)
    keep = d > 0
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    ax.semilogy(n[keep], d[keep], marker=".", lw=1)
    ax.set_xlabel("n")
    ax.set_ylabel("d(x_n, S)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
    return n[keep], d[keep]


def plot_modulus(radii, values, path, title="estimated modulus"):
    """Log-log plot of an estimated modulus; zero values are left out.
    Returns the plotted (r, rho) arrays."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (v > 0) & np.isfinite(v)
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    if keep.any():
        ax.loglog(r[keep], v[keep], marker="o", lw=1)
    else:
        ax.set_xscale("log")
        if r.size:
            ax.set_xlim(r.min(), r.max())
        ax.text(0.5, 0.5, "estimate is 0 at every radius", transform=ax.transAxes,
                ha="center", va="center")
    ax.set_xlabel("r")
    ax.set_ylabel("rho(r)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
    return r[keep], v[keep]
