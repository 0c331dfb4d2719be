"""Command-line entry point: reproducible solves, convergence studies and
inf-sup probes with CSV / mesh / field artifacts and a run manifest."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    PRESETS,
    convergence_study,
    export_field_vtk,
    get_discretization,
    manufactured_problem,
    solve_problem,
)
from .mesh import MeshError, check_mesh_assumptions, write_mesh
from .system import SolveError, infsup_estimate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_MESH_QUALITY = 3

CSV_HEADER = "preset,mesh,k,cip,level,h,ndof,e_h1,e_l2,cip_norm,rate_h1,rate_l2"


def _g17(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="diffusion_dominated", choices=PRESETS)
    p.add_argument("--mesh", default="voro", choices=("voro", "quad"))
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--cip", default="on", choices=("on", "off"))
    p.add_argument("--delta", type=float, default=0.1,
                   help="Nitsche penalty parameter")
    p.add_argument("--epsilon", type=float, default=None,
                   help="override the preset diffusion coefficient")
    p.add_argument("--sigma", type=float, default=None,
                   help="override the preset reaction constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lloyd", type=int, default=20,
                   help="Lloyd relaxation iterations for the voro family")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--strict-mesh", action="store_true",
                   help="reject meshes failing the quality threshold")
    p.add_argument("--rho", type=float, default=0.05,
                   help="shape-regularity threshold for --strict-mesh")


def _config(args, cip_on: bool):
    from dataclasses import replace
    cfg = manufactured_problem(args.preset, args.degree, cip_on, args.delta)
    if args.epsilon is not None:
        cfg = replace(cfg, epsilon=args.epsilon)
    if args.sigma is not None:
        cfg = replace(cfg, sigma=args.sigma)
    return cfg


def _check_quality(args, disc) -> None:
    if not args.strict_mesh:
        return
    report = check_mesh_assumptions(disc.mesh, args.rho)
    if not report.passed:
        raise MeshError(
            f"mesh quality below rho={args.rho}: edge {report.rho_edge:.3f}, "
            f"ball {report.rho_ball:.3f}, uniform {report.rho_uniform:.3f}"
        )


def _manifest(args, outputs: list[str], outdir: Path, t0: float) -> None:
    data = {
        "tool_version": __version__,
        "command": vars(args).copy(),
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    }
    data["command"].pop("func", None)
    path = outdir / "manifest.json"
    path.write_text(json.dumps(data, indent=2, default=str) + "\n")


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    if args.degree not in (1, 2, 3):
        print("unsupported degree (use 1, 2 or 3)", file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        disc = get_discretization(args.mesh, args.cells, args.seed, args.degree,
                                  args.lloyd)
        _check_quality(args, disc)
    except MeshError as exc:
        print(f"mesh rejected: {exc}", file=sys.stderr)
        return EXIT_MESH_QUALITY
    cfg = _config(args, args.cip == "on")
    try:
        report, err = solve_problem(disc, cfg)
    except SolveError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    outputs = []
    mesh_path = outdir / "mesh.txt"
    write_mesh(disc.mesh, mesh_path)
    outputs.append(str(mesh_path))
    field_path = outdir / "field.vtk"
    export_field_vtk(disc, report.solution, field_path)
    outputs.append(str(field_path))
    sol_path = outdir / "solution.csv"
    with open(sol_path, "w") as fh:
        fh.write("dof,value\n")
        for i, v in enumerate(report.solution):
            fh.write(f"{i},{v:.17g}\n")
    outputs.append(str(sol_path))
    _manifest(args, outputs, outdir, t0)
    print(f"solved {disc.n_dofs} DoFs: e_h1={err.e_h1:.6e} e_l2={err.e_l2:.6e} "
          f"max|dof|={np.abs(report.solution).max():.6e}")
    return EXIT_OK


def _write_csv(path: Path, tables) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for table in tables:
            for row in table.rows:
                fh.write(",".join([
                    table.preset, table.mesh_family, str(table.k),
                    "on" if table.cip_on else "off", str(row.level),
                    _g17(row.h), str(row.n_dofs), _g17(row.e_h1),
                    _g17(row.e_l2), _g17(row.cip), _g17(row.rate_h1),
                    _g17(row.rate_l2),
                ]) + "\n")


def cmd_converge(args) -> int:
    t0 = time.perf_counter()
    if args.degree not in (1, 2, 3):
        print("unsupported degree (use 1, 2 or 3)", file=sys.stderr)
        return EXIT_USAGE
    try:
        levels = [int(t) for t in args.levels.split(",")]
    except ValueError:
        print("malformed --levels; expected comma-separated integers",
              file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    variants = [args.cip == "on"]
    if args.compare_cip:
        variants = [True, False]
    tables = []
    try:
        for cip_on in variants:
            tables.append(convergence_study(
                args.preset, args.degree, args.mesh, levels, args.seed,
                cip_on, args.delta, args.lloyd))
    except (SolveError, MeshError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    csv_path = outdir / "convergence.csv"
    _write_csv(csv_path, tables)
    _manifest(args, [str(csv_path)], outdir, t0)
    for table in tables:
        tag = "cip=on " if table.cip_on else "cip=off"
        last = table.rows[-1]
        rates = (f"rate_h1={last.rate_h1:.2f} rate_l2={last.rate_l2:.2f}"
                 if last.rate_h1 is not None else "single level")
        print(f"{table.preset} {tag} k={table.k}: {rates}")
    return EXIT_OK


def cmd_infsup(args) -> int:
    t0 = time.perf_counter()
    if args.degree not in (1, 2, 3):
        print("unsupported degree (use 1, 2 or 3)", file=sys.stderr)
        return EXIT_USAGE
    try:
        levels = [int(t) for t in args.levels.split(",")]
    except ValueError:
        print("malformed --levels", file=sys.stderr)
        return EXIT_USAGE
    if max(levels) > 512:
        print("inf-sup probe limited to --cells <= 512", file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = _config(args, args.cip == "on")
    rows = []
    try:
        for cells in levels:
            disc = get_discretization(args.mesh, cells, args.seed, args.degree,
                                      args.lloyd)
            est = infsup_estimate(disc, cfg.epsilon, cfg.sigma, cfg.beta,
                                  cfg.delta, cfg.cip_on)
            rows.append((cells, disc.h, disc.n_dofs, est))
            print(f"cells={cells} ndof={disc.n_dofs} infsup={est:.6e}")
    except SolveError as exc:
        print(f"probe failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    csv_path = outdir / "infsup.csv"
    with open(csv_path, "w") as fh:
        fh.write("cells,h,ndof,infsup\n")
        for cells, h, ndof, est in rows:
            fh.write(f"{cells},{h:.17g},{ndof},{est:.17g}\n")
    _manifest(args, [str(csv_path)], outdir, t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cipvem",
        description="CIP-stabilized virtual element experiments on the unit square",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one solve with solution/field export")
    _add_common(p)
    p.add_argument("--cells", type=int, default=256)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="convergence study over mesh levels")
    _add_common(p)
    p.add_argument("--levels", default="64,256,1024")
    p.add_argument("--compare-cip", action="store_true",
                   help="run cip on and off on identical meshes")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("infsup", help="empirical inf-sup constants (small meshes)")
    _add_common(p)
    p.add_argument("--levels", default="16,64,256")
    p.set_defaults(func=cmd_infsup)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
