"""Plot data as (x, y) CSV pairs, and optional matplotlib figures.

matplotlib is imported only inside :func:`render_figures`.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .experiments import ResultRow

__all__ = ["plot_series", "write_plot_data", "render_figures"]

# kind -> (x field, [y fields], log-log axes)
_LAYOUT = {
    "order-sweep": ("h", ["err"], True),
    "pollution-sweep": ("omega", ["err"], True),
    "precond-study": ("omega", ["n_iter_cg", "n_iter_pcg"], True),
    "run": ("h", ["err"], True),
}


def plot_series(rows: list[ResultRow], kind: str) -> dict[str, list[tuple[float, float]]]:
    """``{y_field: [(x, y), ...]}`` with rows lacking a value skipped."""
    xname, ynames, _ = _LAYOUT[kind]
    out = {}
    for yname in ynames:
        pts = [(getattr(r, xname), getattr(r, yname)) for r in rows]
        out[yname] = [(float(x), float(y)) for x, y in pts if x is not None and y is not None]
    return out


def write_plot_data(rows: list[ResultRow], kind: str, outdir) -> list[Path]:
    outdir = Path(outdir)
    xname = _LAYOUT[kind][0]
    paths = []
    for yname, pts in plot_series(rows, kind).items():
        path = outdir / f"plot_{yname}_vs_{xname}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([xname, yname])
            w.writerows(pts)
        paths.append(path)
    return paths


def render_figures(rows: list[ResultRow], kind: str, outdir, fmt: str = "png") -> list[Path]:
    """Render one figure per sweep kind next to the CSV output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    xname, _, loglog = _LAYOUT[kind]
    series = plot_series(rows, kind)
    if not any(len(pts) for pts in series.values()):
        return []
    fig, ax = plt.subplots(figsize=(5, 4))
    for yname, pts in series.items():
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, "o-", label=yname)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xname)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title(kind)
    path = outdir / f"{kind}.{fmt}"
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return [path]
