"""Global assembly of the stabilized system, sparse solve, and an empirical
inf-sup probe based on the computable norm surrogate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import cholesky, solve_triangular, svdvals

from .forms import (
    AdvectionField,
    _beta_dot_grad_pi0,
    _edge_incidence,
    cell_gamma,
    cip_edge_jump,
    cip_volume_stab,
    local_advection_skew,
    local_diffusion,
    local_load,
    local_reaction,
    nitsche_boundary,
    nitsche_data_load,
)
from .mesh import PolygonalMesh, mesh_size
from .vemspace import DofMap, VemElement, build_dof_map, build_elements


class SolveError(Exception):
    pass


class Discretization:
    """Mesh + degree bundle caching the DoF map and per-element projectors."""

    def __init__(self, mesh: PolygonalMesh, k: int):
        self.mesh = mesh
        self.k = k
        self.dof_map: DofMap = build_dof_map(mesh, k)
        self.elements: list[VemElement] = build_elements(mesh, k)
        self.h = mesh_size(mesh)
        self.edge_sides = _edge_incidence(mesh)

    @property
    def n_dofs(self) -> int:
        return self.dof_map.n_dofs


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_dofs: int
    meta: dict = field(default_factory=dict)


@dataclass
class SolveReport:
    solution: np.ndarray
    relative_residual: float
    n_dofs: int
    wall_time: float


class _Accumulator:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, gdofs_r: np.ndarray, gdofs_c: np.ndarray, local: np.ndarray):
        r, c = np.meshgrid(gdofs_r, gdofs_c, indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(np.asarray(local).ravel())

    def tocsr(self, n: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((n, n))
        A = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        ).tocsr()
        A.sum_duplicates()
        return A


def assemble_blocks(disc: Discretization, beta: AdvectionField,
                    epsilon: float, delta: float) -> dict[str, sp.csr_matrix]:
    """Independently assembled operator blocks (diffusion unscaled by epsilon)."""
    n = disc.n_dofs
    accs = {name: _Accumulator() for name in
            ("diffusion", "advection", "reaction", "nitsche", "cip")}
    for c, el in enumerate(disc.elements):
        g = disc.dof_map.cell_dofs[c]
        accs["diffusion"].add(g, g, local_diffusion(el))
        accs["advection"].add(g, g, local_advection_skew(el, beta))
        accs["reaction"].add(g, g, local_reaction(el))
        if any(e.boundary for e in el.edges):
            accs["nitsche"].add(g, g, nitsche_boundary(el, beta, epsilon, delta))
        accs["cip"].add(g, g, cip_volume_stab(el, beta))
    for ei in range(disc.mesh.n_edges):
        if disc.mesh.boundary_edge[ei]:
            continue
        (cl, sl), (cr, sr) = disc.edge_sides[ei]
        M, _ = cip_edge_jump(disc.elements[cl], sl, disc.elements[cr], sr, beta)
        gl = disc.dof_map.cell_dofs[cl]
        gr = disc.dof_map.cell_dofs[cr]
        gg = np.concatenate([gl, gr])
        accs["cip"].add(gg, gg, M)
    return {name: acc.tocsr(n) for name, acc in accs.items()}


def assemble(disc: Discretization, epsilon: float, sigma: float,
             beta: AdvectionField, delta: float, cip_on: bool,
             f: Callable[[np.ndarray], np.ndarray],
             boundary_data: Callable[[np.ndarray], np.ndarray] | None = None,
             ) -> SparseSystem:
    """A = eps*a_h + b_h^skew + sigma*c_h + Nitsche (+ CIP); rhs from the load
    and, when given, the Nitsche boundary-data terms."""
    blocks = assemble_blocks(disc, beta, epsilon, delta)
    A = (epsilon * blocks["diffusion"] + blocks["advection"]
         + sigma * blocks["reaction"] + blocks["nitsche"])
    if cip_on:
        A = A + blocks["cip"]
    rhs = np.zeros(disc.n_dofs)
    for c, el in enumerate(disc.elements):
        g = disc.dof_map.cell_dofs[c]
        rhs[g] += local_load(el, f)
        if boundary_data is not None and any(e.boundary for e in el.edges):
            rhs[g] += nitsche_data_load(el, beta, epsilon, delta, boundary_data)
    if not np.isfinite(rhs).all():
        raise SolveError("non-finite right-hand side")
    meta = {"epsilon": epsilon, "sigma": sigma, "beta": beta.label,
            "delta": delta, "cip_on": cip_on, "k": disc.k}
    return SparseSystem(matrix=A.tocsr(), rhs=rhs, n_dofs=disc.n_dofs, meta=meta)


def solve(system: SparseSystem) -> SolveReport:
    """Direct sparse factorization; verifies the relative residual."""
    t0 = time.perf_counter()
    A, b = system.matrix, system.rhs
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return SolveReport(np.zeros(system.n_dofs), 0.0, system.n_dofs,
                           time.perf_counter() - t0)
    try:
        x = spla.spsolve(A.tocsc(), b)
    except RuntimeError as exc:
        raise SolveError(f"sparse factorization failed: {exc}") from exc
    if not np.isfinite(x).all():
        raise SolveError("solver returned non-finite values (singular system?)")
    res = float(np.linalg.norm(A @ x - b) / bnorm)
    if res > 1e-10:
        est = spla.norm(A) * np.linalg.norm(x) / bnorm
        raise SolveError(
            f"relative residual {res:.3e} exceeds 1e-10 "
            f"(growth factor ~{est:.3e}; matrix likely near-singular)"
        )
    return SolveReport(x, res, system.n_dofs, time.perf_counter() - t0)


def matrix_dump(system: SparseSystem, path) -> None:
    """Coordinate (row, col, value) text dump for external inspection."""
    coo = system.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{system.n_dofs} {system.n_dofs} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


# ---------------------------------------------------------------------------
# Inf-sup probe


def cip_norm_gram(disc: Discretization, epsilon: float, sigma: float,
                  beta: AdvectionField, delta: float) -> sp.csr_matrix:
    """Gram matrix of the computable norm surrogate: v^T N v = ||v||_cip^2."""
    acc = _Accumulator()
    h = disc.h
    for c, el in enumerate(disc.elements):
        g = disc.dof_map.cell_dofs[c]
        local = epsilon * local_diffusion(el)
        C = _beta_dot_grad_pi0(el, beta)
        local += h * C.T @ (el.quad_weights[:, None] * C)
        if sigma:
            local += sigma * local_reaction(el)
        hE = el.geom.diameter
        for e in el.edges:
            if e.boundary:
                xi2 = (epsilon / (delta * hE)
                       + 0.5 * np.abs(beta(e.quad_points) @ e.normal))
                local += e.trace.T @ ((e.quad_weights * xi2)[:, None] * e.trace)
        local += cell_gamma(el, beta) * hE * el.S_nabla
        acc.add(g, g, local)
    for ei in range(disc.mesh.n_edges):
        if disc.mesh.boundary_edge[ei]:
            continue
        (cl, sl), (cr, sr) = disc.edge_sides[ei]
        M, _ = cip_edge_jump(disc.elements[cl], sl, disc.elements[cr], sr, beta)
        gg = np.concatenate([disc.dof_map.cell_dofs[cl],
                             disc.dof_map.cell_dofs[cr]])
        acc.add(gg, gg, M)
    return acc.tocsr(disc.n_dofs)


def infsup_estimate(disc: Discretization, epsilon: float, sigma: float,
                    beta: AdvectionField, delta: float, cip_on: bool,
                    max_dofs: int = 2000) -> float:
    """Smallest singular value of N^{-1/2} A N^{-1/2}: an empirical inf-sup
    constant in the surrogate norm (trend diagnostic only)."""
    if disc.n_dofs > max_dofs:
        raise ValueError(f"inf-sup probe limited to {max_dofs} DoFs")
    system = assemble(disc, epsilon, sigma, beta, delta, cip_on,
                      f=lambda p: np.zeros(len(p)))
    A = system.matrix.toarray()
    N = cip_norm_gram(disc, epsilon, sigma, beta, delta).toarray()
    N = 0.5 * (N + N.T)
    try:
        L = cholesky(N, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolveError("norm Gram matrix is not positive definite") from exc
    M = solve_triangular(L, A, lower=True)
    M = solve_triangular(L, M.T, lower=True).T
    return float(svdvals(M).min())
