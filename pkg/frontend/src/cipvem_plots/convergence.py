"""Log-log convergence figures from the solver's convergence CSV files.

Expected schema (one row per refinement level):
preset,mesh,k,cip,level,h,ndof,e_h1,e_l2,cip_norm,rate_h1,rate_l2
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

EXPECTED_COLUMNS = [
    "preset", "mesh", "k", "cip", "level", "h", "ndof",
    "e_h1", "e_l2", "cip_norm", "rate_h1", "rate_l2",
]

ERROR_COLUMNS = ("e_h1", "e_l2", "cip_norm")


class PlotError(Exception):
    pass


@dataclass
class ConvergenceSeries:
    """One (preset, cip) curve with its reference slope."""

    label: str
    k: int
    h: list[float] = field(default_factory=list)
    error: list[float] = field(default_factory=list)

    def fitted_slope(self, n_last: int = 3) -> float:
        """Least-squares slope on the last n_last levels."""
        if len(self.h) < 2:
            raise PlotError(f"series '{self.label}' needs at least two levels")
        h = np.asarray(self.h[-n_last:])
        e = np.asarray(self.error[-n_last:])
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def load_series(paths, error_column: str) -> list[ConvergenceSeries]:
    if error_column not in ERROR_COLUMNS:
        raise PlotError(f"unknown error column '{error_column}'")
    series: dict[tuple, ConvergenceSeries] = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != EXPECTED_COLUMNS:
                raise PlotError(f"{path}: unexpected header {reader.fieldnames}")
            count = 0
            for i, row in enumerate(reader, start=2):
                try:
                    h = float(row["h"])
                    err = float(row[error_column])
                    k = int(row["k"])
                except (TypeError, ValueError) as exc:
                    raise PlotError(f"{path}: malformed row {i}: {exc}") from exc
                if h <= 0 or err <= 0:
                    raise PlotError(
                        f"{path}: row {i}: h and errors must be positive"
                    )
                key = (row["preset"], row["cip"], k)
                label = f"{row['preset']} k={k} cip={row['cip']}"
                s = series.setdefault(key, ConvergenceSeries(label=label, k=k))
                s.h.append(h)
                s.error.append(err)
                count += 1
            if count == 0:
                raise PlotError(f"{path}: no data rows")
    for s in series.values():
        if s.h != sorted(s.h, reverse=True):
            raise PlotError(f"series '{s.label}': h must decrease")
    return list(series.values())


def _reference_triangle(ax, h, e, slope, color="gray"):
    h0, h1 = h[-1] * 1.1, h[-2] * 0.9
    e0 = e[-1]
    ax.plot([h0, h1, h1, h0], [e0, e0 * (h1 / h0) ** slope, e0, e0],
            linestyle="--", linewidth=0.8, color=color)
    ax.annotate(f"{slope:g}", (h1, np.sqrt(e0 * e0 * (h1 / h0) ** slope)),
                fontsize=8, color=color)


def plot_convergence(csv_paths, error_column: str, out_path) -> None:
    """Write a log-log plot with per-series fitted slopes in the legend."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    all_series = load_series(csv_paths, error_column)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for s in all_series:
        slope = s.fitted_slope()
        ax.loglog(s.h, s.error, marker="o",
                  label=f"{s.label} (slope {slope:.2f})")
        _reference_triangle(ax, s.h, s.error, s.k)
        _reference_triangle(ax, s.h, s.error, s.k + 1)
    ax.set_xlabel("h")
    ax.set_ylabel(error_column)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
