"""Cell-field figures from the solver's legacy-VTK polygon exports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convergence import PlotError


@dataclass
class FieldData:
    points: np.ndarray          # (n, 2)
    polygons: list[list[int]]
    values: np.ndarray          # (n,) one value per point

    @property
    def vmin(self) -> float:
        return float(self.values.min())

    @property
    def vmax(self) -> float:
        return float(self.values.max())


def load_field(path) -> FieldData:
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh]
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise PlotError(f"{path}: not a legacy VTK file")
    try:
        i = next(n for n, l in enumerate(lines) if l.startswith("POINTS"))
        n_points = int(lines[i].split()[1])
        pts = np.array([[float(t) for t in lines[i + 1 + j].split()[:2]]
                        for j in range(n_points)])
        i = next(n for n, l in enumerate(lines) if l.startswith("POLYGONS"))
        n_polys = int(lines[i].split()[1])
        polys = []
        for j in range(n_polys):
            toks = [int(t) for t in lines[i + 1 + j].split()]
            if toks[0] != len(toks) - 1:
                raise PlotError(f"{path}: malformed polygon line {i + 1 + j}")
            polys.append(toks[1:])
        i = next(n for n, l in enumerate(lines) if l.startswith("POINT_DATA"))
        n_vals = int(lines[i].split()[1])
        i = next(n for n, l in enumerate(lines[i:], start=i)
                 if l.startswith("LOOKUP_TABLE"))
        vals = np.array([float(lines[i + 1 + j]) for j in range(n_vals)])
    except (StopIteration, IndexError, ValueError) as exc:
        raise PlotError(f"{path}: truncated or malformed VTK data: {exc}") from exc
    if n_vals != n_points:
        raise PlotError(f"{path}: {n_vals} values for {n_points} points")
    return FieldData(points=pts, polygons=polys, values=vals)


def plot_field(field_path, out_path, title: str | None = None) -> FieldData:
    """Flat-shaded polygon heatmap annotated with the field's min and max."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import PolyCollection

    data = load_field(field_path)
    verts = [data.points[p] for p in data.polygons]
    face_vals = np.array([data.values[p].mean() for p in data.polygons])
    fig, ax = plt.subplots(figsize=(5.5, 5))
    coll = PolyCollection(verts, array=face_vals, cmap="viridis",
                          edgecolors="none")
    ax.add_collection(coll)
    ax.autoscale()
    ax.set_aspect("equal")
    fig.colorbar(coll, ax=ax, shrink=0.85)
    ax.set_title(title or "")
    ax.text(0.02, 1.02,
            f"min {data.vmin:.3g}   max {data.vmax:.3g}",
            transform=ax.transAxes, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return data
