"""Manufactured solutions, error norms, convergence studies and the
stabilized/unstabilized comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .forms import AdvectionField, cip_norm, constant_field, trig_field
from .mesh import PolygonalMesh, build_distorted_quad_mesh, build_voronoi_mesh
from .system import Discretization, SolveReport, assemble, solve

PRESETS = (
    "diffusion_dominated",
    "advection_const",
    "advection_var_sigma0",
    "advection_var_sigma1",
)


@dataclass(frozen=True)
class ProblemConfig:
    """Full description of one manufactured run."""

    preset: str
    epsilon: float
    sigma: float
    beta: AdvectionField
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    lap_u: Callable[[np.ndarray], np.ndarray]
    k: int
    cip_on: bool
    delta: float = 0.1
    boundary_data: Callable[[np.ndarray], np.ndarray] | None = None

    def f(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        conv = (self.beta(p) * self.grad_u(p)).sum(axis=1)
        return -self.epsilon * self.lap_u(p) + conv + self.sigma * self.u(p)


def _sin_sin():
    pi = np.pi

    def u(p):
        return np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])

    def grad(p):
        return np.column_stack([
            pi * np.cos(pi * p[:, 0]) * np.sin(pi * p[:, 1]),
            pi * np.sin(pi * p[:, 0]) * np.cos(pi * p[:, 1]),
        ])

    def lap(p):
        return -2.0 * pi ** 2 * np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])

    return u, grad, lap


def manufactured_problem(preset: str, k: int, cip_on: bool,
                         delta: float = 0.1) -> ProblemConfig:
    """The paper-style presets, all with exact solution sin(pi x) sin(pi y)."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset '{preset}'; choose from {PRESETS}")
    u, grad, lap = _sin_sin()
    if preset == "diffusion_dominated":
        eps, sigma, beta = 1.0, 0.0, constant_field([1.0, 0.5])
    elif preset == "advection_const":
        eps, sigma, beta = 1e-9, 0.0, constant_field([1.0, 0.5])
    elif preset == "advection_var_sigma0":
        eps, sigma, beta = 1e-9, 0.0, trig_field()
    else:
        eps, sigma, beta = 1e-9, 1.0, trig_field()
    return ProblemConfig(preset=preset, epsilon=eps, sigma=sigma, beta=beta,
                         u=u, grad_u=grad, lap_u=lap, k=k, cip_on=cip_on,
                         delta=delta)


def polynomial_problem(exponents: tuple[int, int], epsilon: float, sigma: float,
                       beta: AdvectionField, k: int, cip_on: bool,
                       delta: float = 0.1) -> ProblemConfig:
    """Patch-test configuration with exact solution x^a y^b and its trace
    supplied through the Nitsche data terms."""
    a, b = exponents

    def u(p):
        return p[:, 0] ** a * p[:, 1] ** b

    def grad(p):
        gx = a * p[:, 0] ** (a - 1) * p[:, 1] ** b if a else np.zeros(len(p))
        gy = b * p[:, 0] ** a * p[:, 1] ** (b - 1) if b else np.zeros(len(p))
        return np.column_stack([gx, gy])

    def lap(p):
        out = np.zeros(len(p))
        if a >= 2:
            out += a * (a - 1) * p[:, 0] ** (a - 2) * p[:, 1] ** b
        if b >= 2:
            out += b * (b - 1) * p[:, 0] ** a * p[:, 1] ** (b - 2)
        return out

    return ProblemConfig(preset=f"poly_x{a}y{b}", epsilon=epsilon, sigma=sigma,
                         beta=beta, u=u, grad_u=grad, lap_u=lap, k=k,
                         cip_on=cip_on, delta=delta, boundary_data=u)


# ---------------------------------------------------------------------------
# Errors


@dataclass(frozen=True)
class ErrorReport:
    e_h1: float
    e_l2: float
    cip: float
    h: float
    n_dofs: int


def compute_errors(disc: Discretization, solution: np.ndarray,
                   config: ProblemConfig) -> ErrorReport:
    """Broken H1-seminorm error against Pi-nabla u_h and L2 error against
    Pi0 u_h, both by per-cell quadrature with the analytic exact solution."""
    from .quadrature import monomial_gradients

    err_h1 = 0.0
    err_l2 = 0.0
    for c, el in enumerate(disc.elements):
        u_loc = solution[disc.dof_map.cell_dofs[c]]
        pts, w = el.quad_points, el.quad_weights
        coeff_n = el.projectors.pi_nabla @ u_loc
        gx, gy = monomial_gradients(el.basis, pts)
        g_ex = config.grad_u(pts)
        err_h1 += w @ ((g_ex[:, 0] - gx @ coeff_n) ** 2
                       + (g_ex[:, 1] - gy @ coeff_n) ** 2)
        vals = el.M @ (el.projectors.pi_zero @ u_loc)
        err_l2 += w @ ((config.u(pts) - vals) ** 2)
    cip_val, _ = cip_norm(disc.mesh, disc.dof_map, disc.elements, solution,
                          config.epsilon, config.sigma, config.beta,
                          config.delta)
    return ErrorReport(e_h1=float(np.sqrt(err_h1)), e_l2=float(np.sqrt(err_l2)),
                       cip=cip_val, h=disc.h, n_dofs=disc.n_dofs)


def solve_problem(disc: Discretization,
                  config: ProblemConfig) -> tuple[SolveReport, ErrorReport]:
    system = assemble(disc, config.epsilon, config.sigma, config.beta,
                      config.delta, config.cip_on, config.f,
                      boundary_data=config.boundary_data)
    report = solve(system)
    errors = compute_errors(disc, report.solution, config)
    return report, errors


# ---------------------------------------------------------------------------
# Mesh helpers with caching (runs with identical parameters share meshes)

_mesh_cache: dict[tuple, PolygonalMesh] = {}

DEFAULT_LLOYD = 20


def get_mesh(family: str, cells: int, seed: int,
             lloyd: int = DEFAULT_LLOYD, distortion: float = 0.25) -> PolygonalMesh:
    if family == "voro":
        key = ("voro", cells, seed, lloyd)
        if key not in _mesh_cache:
            _mesh_cache[key] = build_voronoi_mesh(cells, lloyd, seed)
    elif family == "quad":
        n = max(1, round(math.sqrt(cells)))
        key = ("quad", n, seed, distortion)
        if key not in _mesh_cache:
            _mesh_cache[key] = build_distorted_quad_mesh(n, distortion, seed)
    else:
        raise ValueError(f"unknown mesh family '{family}'")
    return _mesh_cache[key]


_disc_cache: dict[tuple, Discretization] = {}


def get_discretization(family: str, cells: int, seed: int, k: int,
                       lloyd: int = DEFAULT_LLOYD,
                       distortion: float = 0.25) -> Discretization:
    key = (family, cells, seed, k, lloyd, distortion)
    if key not in _disc_cache:
        mesh = get_mesh(family, cells, seed, lloyd, distortion)
        _disc_cache[key] = Discretization(mesh, k)
    return _disc_cache[key]


# ---------------------------------------------------------------------------
# Convergence


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    cells: int
    h: float
    n_dofs: int
    e_h1: float
    e_l2: float
    cip: float
    rate_h1: float | None = None
    rate_l2: float | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    preset: str
    mesh_family: str
    k: int
    cip_on: bool
    rows: tuple[ConvergenceRow, ...]

    def last_rate(self, which: str = "l2") -> float:
        r = self.rows[-1]
        return r.rate_l2 if which == "l2" else r.rate_h1


def observed_rate(e0: float, e1: float, h0: float, h1: float) -> float:
    return math.log(e0 / e1) / math.log(h0 / h1)


def convergence_study(preset: str, k: int, mesh_family: str,
                      levels: list[int], seed: int, cip_on: bool,
                      delta: float = 0.1,
                      lloyd: int = DEFAULT_LLOYD) -> ConvergenceTable:
    if sorted(levels) != list(levels) or len(set(levels)) != len(levels):
        raise ValueError("levels must be strictly increasing")
    config = manufactured_problem(preset, k, cip_on, delta)
    rows: list[ConvergenceRow] = []
    for lvl, cells in enumerate(levels):
        disc = get_discretization(mesh_family, cells, seed, k, lloyd)
        _, err = solve_problem(disc, config)
        rate_h1 = rate_l2 = None
        if rows:
            prev = rows[-1]
            rate_h1 = observed_rate(prev.e_h1, err.e_h1, prev.h, err.h)
            rate_l2 = observed_rate(prev.e_l2, err.e_l2, prev.h, err.h)
        rows.append(ConvergenceRow(level=lvl, cells=cells, h=err.h,
                                   n_dofs=err.n_dofs, e_h1=err.e_h1,
                                   e_l2=err.e_l2, cip=err.cip,
                                   rate_h1=rate_h1, rate_l2=rate_l2))
    return ConvergenceTable(preset=preset, mesh_family=mesh_family, k=k,
                            cip_on=cip_on, rows=tuple(rows))


# ---------------------------------------------------------------------------
# CIP on/off comparison


@dataclass(frozen=True)
class ComparisonResult:
    max_dof_on: float
    max_dof_off: float
    solution_on: np.ndarray
    solution_off: np.ndarray
    disc: Discretization

    @property
    def ratio(self) -> float:
        return self.max_dof_off / self.max_dof_on


def cip_ab_comparison(preset: str, k: int, mesh_family: str, cells: int,
                      seed: int, delta: float = 0.1,
                      lloyd: int = DEFAULT_LLOYD) -> ComparisonResult:
    """Solve the same problem on the same mesh with and without the jump term."""
    disc = get_discretization(mesh_family, cells, seed, k, lloyd)
    on = manufactured_problem(preset, k, cip_on=True, delta=delta)
    off = replace(on, cip_on=False)
    rep_on, _ = solve_problem(disc, on)
    rep_off, _ = solve_problem(disc, off)
    return ComparisonResult(
        max_dof_on=float(np.abs(rep_on.solution).max()),
        max_dof_off=float(np.abs(rep_off.solution).max()),
        solution_on=rep_on.solution,
        solution_off=rep_off.solution,
        disc=disc,
    )


# ---------------------------------------------------------------------------
# Field export (cell-wise Pi0 u_h sampled at cell vertices, VTK legacy polydata)


def export_field_vtk(disc: Discretization, solution: np.ndarray, path) -> None:
    """One point per (cell, vertex) so discontinuous projections plot cleanly."""
    pts: list[np.ndarray] = []
    vals: list[float] = []
    polys: list[list[int]] = []
    for c, el in enumerate(disc.elements):
        u_loc = solution[disc.dof_map.cell_dofs[c]]
        coeff = el.projectors.pi_zero @ u_loc
        from .quadrature import monomial_values
        v = monomial_values(el.basis, el.geom.coords) @ coeff
        base = len(pts)
        polys.append(list(range(base, base + el.n_vertices)))
        pts.extend(el.geom.coords)
        vals.extend(v)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\ncipvem field export\nASCII\n")
        fh.write("DATASET POLYDATA\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for p, val in zip(pts, vals):
            fh.write(f"{p[0]:.17g} {p[1]:.17g} 0\n")
        size = sum(len(p) + 1 for p in polys)
        fh.write(f"POLYGONS {len(polys)} {size}\n")
        for p in polys:
            fh.write(" ".join([str(len(p))] + [str(i) for i in p]) + "\n")
        fh.write(f"POINT_DATA {len(vals)}\nSCALARS u double 1\nLOOKUP_TABLE default\n")
        for val in vals:
            fh.write(f"{val:.17g}\n")
