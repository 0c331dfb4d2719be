"""Local bilinear and linear forms: diffusion, skew advection, reaction,
CIP jump, Nitsche boundary terms, loads, the Oswald quasi-interpolation and
the computable CIP-norm surrogate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import PolygonalMesh, mesh_size
from .quadrature import monomial_values, n_monomials
from .vemspace import DofMap, VemElement


# ---------------------------------------------------------------------------
# Advection fields


@dataclass(frozen=True)
class AdvectionField:
    """Pointwise-evaluable divergence-free velocity field."""

    evaluate: Callable[[np.ndarray], np.ndarray]     # (n,2) -> (n,2)
    divergence: Callable[[np.ndarray], np.ndarray]   # (n,2) -> (n,)
    label: str = "field"
    norm_inf: float = 1.0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(np.atleast_2d(points))

    def check_divergence_free(self, points: np.ndarray, tol: float = 1e-10) -> float:
        worst = float(np.abs(self.divergence(np.atleast_2d(points))).max())
        if worst > tol:
            raise ValueError(f"advection field '{self.label}' has |div| = {worst:.3e}")
        return worst


def constant_field(vec) -> AdvectionField:
    v = np.asarray(vec, dtype=float)
    return AdvectionField(
        evaluate=lambda p: np.broadcast_to(v, (len(p), 2)).copy(),
        divergence=lambda p: np.zeros(len(p)),
        label=f"constant({v[0]:g},{v[1]:g})",
        norm_inf=float(np.linalg.norm(v)),
    )


def linear_field(A, c) -> AdvectionField:
    """Globally affine field beta(x) = A x + c; requires trace(A) = 0."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    if abs(A[0, 0] + A[1, 1]) > 1e-14:
        raise ValueError("affine advection field must have zero trace")
    return AdvectionField(
        evaluate=lambda p: p @ A.T + c,
        divergence=lambda p: np.zeros(len(p)),
        label="affine",
        norm_inf=float(np.linalg.norm(A @ np.ones(2) + c)),
    )


def trig_field() -> AdvectionField:
    """The variable field (-2 pi sin(pi(x+2y)), pi sin(pi(x+2y))); div = 0."""

    def ev(p):
        s = np.sin(np.pi * (p[:, 0] + 2.0 * p[:, 1]))
        return np.column_stack([-2.0 * np.pi * s, np.pi * s])

    def dv(p):
        c = np.cos(np.pi * (p[:, 0] + 2.0 * p[:, 1]))
        return -2.0 * np.pi ** 2 * c + 2.0 * np.pi ** 2 * c

    return AdvectionField(evaluate=ev, divergence=dv, label="trig",
                          norm_inf=float(np.sqrt(5.0) * np.pi))


# ---------------------------------------------------------------------------
# Element-local forms


def local_diffusion(el: VemElement) -> np.ndarray:
    """a_h: projected-gradient mass plus dofi-dofi on the Pi-nabla residual."""
    P = el.projectors
    K = (P.pi_zero_grad_x.T @ el.H_lo @ P.pi_zero_grad_x
         + P.pi_zero_grad_y.T @ el.H_lo @ P.pi_zero_grad_y)
    return K + el.S_nabla


def local_reaction(el: VemElement) -> np.ndarray:
    P = el.projectors
    return P.pi_zero.T @ el.H @ P.pi_zero + el.geom.area * el.S_zero


def _beta_dot_grad_pi0(el: VemElement, beta: AdvectionField) -> np.ndarray:
    """(n_quad, n_dofs) values of beta . grad Pi0_k at the cell quadrature points."""
    bv = beta(el.quad_points)
    gx, gy = el.pi_zero_grad_values(el.quad_points)
    return bv[:, 0:1] * gx + bv[:, 1:2] * gy


def local_advection_skew(el: VemElement, beta: AdvectionField) -> np.ndarray:
    """Skew part of b_h: projected convection plus the boundary correction."""
    w = el.quad_weights
    Pv = el.M @ el.projectors.pi_zero
    Bmat = Pv.T @ (w[:, None] * _beta_dot_grad_pi0(el, beta))
    for e in el.edges:
        bn = beta(e.quad_points) @ e.normal
        Pe = monomial_values(el.basis, e.quad_points) @ el.projectors.pi_zero
        resid = e.trace - Pe  # (I - Pi0) u on the edge
        Bmat += e.trace.T @ ((e.quad_weights * bn)[:, None] * resid)
    return 0.5 * (Bmat - Bmat.T)


def edge_gamma(el: VemElement, side: int, beta: AdvectionField) -> float:
    """max |beta . n| over the edge quadrature points."""
    e = el.edges[side]
    return float(np.abs(beta(e.quad_points) @ e.normal).max())


def cell_gamma(el: VemElement, beta: AdvectionField) -> float:
    return max(edge_gamma(el, s, beta) for s in range(len(el.edges)))


def cip_edge_jump(el_left: VemElement, side_left: int,
                  el_right: VemElement, side_right: int,
                  beta: AdvectionField) -> tuple[np.ndarray, float]:
    """Jump penalty gamma_e h_e^2 int_e [grad Pi0 u].[grad Pi0 v] over the
    union of the two cells' DoFs (left block first)."""
    e = el_left.edges[side_left]
    if e.boundary:
        raise ValueError("CIP jump is only defined on interior edges")
    gamma = float(np.abs(beta(e.quad_points) @ e.normal).max())
    pts, w = e.quad_points, e.quad_weights
    lx, ly = el_left.pi_zero_grad_values(pts)
    rx, ry = el_right.pi_zero_grad_values(pts)
    Jx = np.hstack([lx, -rx])
    Jy = np.hstack([ly, -ry])
    scale = gamma * e.length ** 2
    M = scale * (Jx.T @ (w[:, None] * Jx) + Jy.T @ (w[:, None] * Jy))
    return M, gamma


def cip_volume_stab(el: VemElement, beta: AdvectionField) -> np.ndarray:
    return cell_gamma(el, beta) * el.geom.diameter * el.S_nabla


def nitsche_boundary(el: VemElement, beta: AdvectionField, epsilon: float,
                     delta: float) -> np.ndarray:
    """Consistency, penalty and inflow terms on the cell's boundary edges."""
    A = np.zeros((el.n_dofs, el.n_dofs))
    hE = el.geom.diameter
    from .quadrature import monomial_gradients
    for e in el.edges:
        if not e.boundary:
            continue
        gx, gy = monomial_gradients(el.basis, e.quad_points)
        dn = (gx * e.normal[0] + gy * e.normal[1]) @ el.projectors.pi_nabla
        bn_abs = np.abs(beta(e.quad_points) @ e.normal)
        w = e.quad_weights
        A -= epsilon * e.trace.T @ (w[:, None] * dn)
        A += (epsilon / (delta * hE)) * e.trace.T @ (w[:, None] * e.trace)
        A += 0.5 * e.trace.T @ ((w * bn_abs)[:, None] * e.trace)
    return A


def local_load(el: VemElement, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    w = el.quad_weights
    return (el.M @ el.projectors.pi_zero).T @ (w * f(el.quad_points))


def nitsche_data_load(el: VemElement, beta: AdvectionField, epsilon: float,
                      delta: float,
                      g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Boundary-data contribution: penalty plus inflow weighting of g.

    Consistent with dropping the adjoint Nitsche term: the coefficient is
    eps/(delta h_E) + (|beta.n| - beta.n)/2.
    """
    F = np.zeros(el.n_dofs)
    hE = el.geom.diameter
    for e in el.edges:
        if not e.boundary:
            continue
        bn = beta(e.quad_points) @ e.normal
        coef = epsilon / (delta * hE) + 0.5 * (np.abs(bn) - bn)
        F += e.trace.T @ (e.quad_weights * coef * g(e.quad_points))
    return F


# ---------------------------------------------------------------------------
# Oswald quasi-interpolation


def oswald_interpolate(mesh: PolygonalMesh, dof_map: DofMap,
                       elements: list[VemElement],
                       coeffs: np.ndarray) -> np.ndarray:
    """Map a (possibly discontinuous) piecewise polynomial, given per cell in
    monomial coordinates, to a conforming DoF vector by area-weighted
    averaging of skeleton DoFs; cell moments are taken from the owning cell."""
    k = dof_map.k
    n_mom = n_monomials(k - 2)
    out = np.zeros(dof_map.n_dofs)
    wsum = np.zeros(dof_map.n_dofs)

    areas = np.array([el.geom.area for el in elements])
    for c, el in enumerate(elements):
        local = monomial_values(el.basis, el.geom.coords) @ coeffs[c]
        gdofs = dof_map.cell_dofs[c]
        m = el.n_vertices
        np.add.at(out, gdofs[:m], areas[c] * local)
        np.add.at(wsum, gdofs[:m], areas[c])
        if k > 1:
            for s in range(m):
                sl = el._edge_dof_slice(s)
                from .quadrature import lobatto_points_01
                t = lobatto_points_01(k + 1)[1:-1]
                pts = el.edges[s].p0[None, :] + t[:, None] * (
                    el.edges[s].p1 - el.edges[s].p0)[None, :]
                vals = monomial_values(el.basis, pts) @ coeffs[c]
                np.add.at(out, gdofs[sl], areas[c] * vals)
                np.add.at(wsum, gdofs[sl], areas[c])
        if n_mom:
            mom = (el.H[:n_mom] @ coeffs[c]) / el.geom.area
            out[gdofs[m * k:]] = mom
            wsum[gdofs[m * k:]] = 1.0
    out /= wsum
    return out


# ---------------------------------------------------------------------------
# CIP-norm surrogate


def cip_norm(mesh: PolygonalMesh, dof_map: DofMap, elements: list[VemElement],
             dofs: np.ndarray, epsilon: float, sigma: float,
             beta: AdvectionField, delta: float) -> tuple[float, np.ndarray]:
    """Computable surrogate of the mesh-dependent stability norm.

    Exact H1/L2 terms of virtual functions are replaced by their projected
    counterparts plus the dofi-dofi energies; returns (norm, per-cell norms^2).
    The jump term is split half/half between the two adjacent cells.
    """
    dofs = np.asarray(dofs, dtype=float)
    h = mesh_size(mesh)
    per_cell = np.zeros(mesh.n_cells)

    side_of = _edge_incidence(mesh)
    for c, el in enumerate(elements):
        u = dofs[dof_map.cell_dofs[c]]
        acc = epsilon * float(u @ local_diffusion(el) @ u)
        conv = _beta_dot_grad_pi0(el, beta) @ u
        acc += h * float(el.quad_weights @ conv ** 2)
        if sigma:
            acc += sigma * float(u @ local_reaction(el) @ u)
        hE = el.geom.diameter
        for e in el.edges:
            if e.boundary:
                xi2 = (epsilon / (delta * hE)
                       + 0.5 * np.abs(beta(e.quad_points) @ e.normal))
                tr = e.trace @ u
                acc += float(e.quad_weights @ (xi2 * tr ** 2))
        acc += cell_gamma(el, beta) * hE * float(u @ el.S_nabla @ u)
        per_cell[c] = acc

    for ei, (v0, v1, left, right) in enumerate(mesh.edges):
        if mesh.boundary_edge[ei]:
            continue
        (cl, sl), (cr, sr) = side_of[ei]
        M, _ = cip_edge_jump(elements[cl], sl, elements[cr], sr, beta)
        uu = np.concatenate([dofs[dof_map.cell_dofs[cl]],
                             dofs[dof_map.cell_dofs[cr]]])
        val = float(uu @ M @ uu)
        per_cell[cl] += 0.5 * val
        per_cell[cr] += 0.5 * val
    return float(np.sqrt(per_cell.sum())), per_cell


def _edge_incidence(mesh: PolygonalMesh) -> dict[int, list[tuple[int, int]]]:
    """edge index -> [(cell, local side), ...] with the left cell first."""
    inc: dict[int, list[tuple[int, int]]] = {}
    for c in range(mesh.n_cells):
        for s, e in enumerate(mesh.cell_edges[c]):
            inc.setdefault(e, []).append((c, s))
    for ei, pairs in inc.items():
        if len(pairs) == 2 and pairs[0][0] != mesh.edges[ei][2]:
            pairs.reverse()
    return inc
