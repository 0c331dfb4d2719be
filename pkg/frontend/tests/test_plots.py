"""Plot package tests against synthetic artifacts in the documented formats."""

import numpy as np
import pytest

from cipvem_plots import PlotError, load_field, load_series, plot_convergence, plot_field
from cipvem_plots.cli import main_convergence, main_field

HEADER = "preset,mesh,k,cip,level,h,ndof,e_h1,e_l2,cip_norm,rate_h1,rate_l2"


def write_csv(path, rows):
    path.write_text(HEADER + "\n" + "\n".join(rows) + "\n")


def synthetic_series(path, cip="on", scale=1.0, power=2.0):
    hs = [0.2 / 2 ** i for i in range(4)]
    rows = [
        f"advection_const,voro,1,{cip},{i},{h},{100 * 4 ** i},"
        f"{scale * h ** power},{scale * h ** (power + 1)},0.1,,"
        for i, h in enumerate(hs)
    ]
    write_csv(path, rows)


def synthetic_vtk(path, values):
    """One unit square per value, laid out side by side."""
    n = len(values)
    lines = ["# vtk DataFile Version 3.0", "synthetic", "ASCII",
             "DATASET POLYDATA", f"POINTS {4 * n} double"]
    for i in range(n):
        x = float(i)
        lines += [f"{x} 0 0", f"{x + 1} 0 0", f"{x + 1} 1 0", f"{x} 1 0"]
    lines.append(f"POLYGONS {n} {5 * n}")
    for i in range(n):
        b = 4 * i
        lines.append(f"4 {b} {b + 1} {b + 2} {b + 3}")
    lines += [f"POINT_DATA {4 * n}", "SCALARS u double 1",
              "LOOKUP_TABLE default"]
    for v in values:
        lines += [f"{v}"] * 4
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Convergence


def test_slope_fit_exact_power_law(tmp_path):
    csv = tmp_path / "conv.csv"
    synthetic_series(csv, power=2.0)
    series = load_series([csv], "e_h1")
    assert len(series) == 1
    assert series[0].fitted_slope() == pytest.approx(2.0, abs=0.01)


def test_plot_convergence_writes_image(tmp_path):
    csv = tmp_path / "conv.csv"
    synthetic_series(csv)
    out = tmp_path / "fig.png"
    plot_convergence([csv], "e_l2", out)
    assert out.exists() and out.stat().st_size > 0


def test_empty_csv_rejected(tmp_path):
    csv = tmp_path / "empty.csv"
    csv.write_text(HEADER + "\n")
    out = tmp_path / "fig.png"
    with pytest.raises(PlotError):
        plot_convergence([csv], "e_h1", out)
    assert not out.exists()


def test_malformed_row_diagnostic(tmp_path):
    csv = tmp_path / "bad.csv"
    write_csv(csv, ["advection_const,voro,1,on,0,0.2,100,not-a-number,1,1,,"])
    with pytest.raises(PlotError, match="row 2"):
        load_series([csv], "e_h1")


def test_bad_header_rejected(tmp_path):
    csv = tmp_path / "hdr.csv"
    csv.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(PlotError, match="header"):
        load_series([csv], "e_h1")


def test_on_off_series_separated(tmp_path):
    on = tmp_path / "on.csv"
    off = tmp_path / "off.csv"
    synthetic_series(on, cip="on", scale=1.0)
    synthetic_series(off, cip="off", scale=50.0, power=0.3)
    series = load_series([on, off], "e_l2")
    assert len(series) == 2
    by_cip = {s.label.split("cip=")[1]: s for s in series}
    # the unstabilized curve sits well above the stabilized one everywhere
    assert all(a > 5 * b for a, b in
               zip(by_cip["off"].error, by_cip["on"].error))
    out = tmp_path / "cmp.png"
    plot_convergence([on, off], "e_l2", out)
    assert out.exists()


def test_convergence_cli(tmp_path, capsys):
    csv = tmp_path / "conv.csv"
    synthetic_series(csv)
    out = tmp_path / "cli.png"
    assert main_convergence([str(csv), "--out", str(out)]) == 0
    assert out.exists()
    assert main_convergence([str(tmp_path / "missing.csv"),
                             "--out", str(out)]) == 1


# ---------------------------------------------------------------------------
# Field


def test_field_interpolant_max_near_one(tmp_path):
    # cell samples of sin(pi x) sin(pi y) on a fine grid peak at ~1
    xs = np.linspace(0.05, 0.95, 19)
    vals = np.outer(np.sin(np.pi * xs), np.sin(np.pi * xs)).ravel()
    vtk = tmp_path / "interp.vtk"
    synthetic_vtk(vtk, vals)
    out = tmp_path / "interp.png"
    data = plot_field(vtk, out)
    assert out.exists()
    assert data.vmax == pytest.approx(1.0, abs=0.01)


def test_field_cip_pair(tmp_path):
    # CIP-on/off pair: the stabilized field stays within [-0.2, 1.2]; the
    # unstabilized one exhibits large peaks that the annotation must report
    rng = np.random.default_rng(0)
    stab = np.clip(rng.uniform(-0.05, 1.05, 64), -0.2, 1.2)
    unstab = rng.uniform(-1.0, 1.0, 64) * 100.0
    on_vtk, off_vtk = tmp_path / "on.vtk", tmp_path / "off.vtk"
    synthetic_vtk(on_vtk, stab)
    synthetic_vtk(off_vtk, unstab)
    on = plot_field(on_vtk, tmp_path / "on.png")
    off = plot_field(off_vtk, tmp_path / "off.png")
    assert -0.2 <= on.vmin and on.vmax <= 1.2
    assert max(abs(off.vmin), abs(off.vmax)) >= 10.0
    assert (tmp_path / "on.png").exists() and (tmp_path / "off.png").exists()


def test_field_truncated_file(tmp_path):
    vtk = tmp_path / "trunc.vtk"
    synthetic_vtk(vtk, [1.0, 2.0])
    text = vtk.read_text().splitlines()
    vtk.write_text("\n".join(text[:-3]) + "\n")
    with pytest.raises(PlotError):
        load_field(vtk)


def test_field_not_vtk(tmp_path):
    bad = tmp_path / "bad.vtk"
    bad.write_text("hello\n")
    with pytest.raises(PlotError):
        load_field(bad)


def test_field_cli(tmp_path):
    vtk = tmp_path / "f.vtk"
    synthetic_vtk(vtk, [0.0, 0.5, 1.0])
    out = tmp_path / "f.png"
    assert main_field([str(vtk), "--out", str(out)]) == 0
    assert out.exists()
    assert main_field([str(tmp_path / "missing.vtk"), "--out", str(out)]) == 1
