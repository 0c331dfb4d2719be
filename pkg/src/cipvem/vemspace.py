"""Degrees of freedom and per-element projector matrices of the enhanced VEM space.

Local DoF ordering on a cell with m vertices: the m vertex values (ccw), then
for each side in ccw order the k-1 interior Gauss-Lobatto values (in traversal
order), then the dim P_{k-2} cell moments in monomial order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import ElementGeometry, PolygonalMesh, element_geometry
from .quadrature import (
    MonomialBasis,
    build_cell_quadrature,
    gauss_edge_rule,
    lobatto_points_01,
    monomial_derivative_map,
    monomial_gradients,
    monomial_laplacian_map,
    monomial_mass_matrix,
    monomial_values,
    n_monomials,
)

SUPPORTED_DEGREES = (1, 2, 3)


class ProjectorError(Exception):
    pass


@dataclass(frozen=True)
class DofMap:
    """Global numbering: vertices, then edge-interior values, then cell moments."""

    k: int
    n_dofs: int
    n_vertex_dofs: int
    n_edge_dofs: int
    n_moment_dofs: int
    cell_dofs: tuple[np.ndarray, ...]
    boundary: np.ndarray  # bool per global DoF


def build_dof_map(mesh: PolygonalMesh, k: int) -> DofMap:
    if k not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported degree {k}; supported: {SUPPORTED_DEGREES}")
    n_mom = n_monomials(k - 2)
    nv, ne, nc = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    edge_base = nv
    moment_base = nv + (k - 1) * ne
    n_dofs = moment_base + n_mom * nc

    cell_dofs = []
    for c, loop in enumerate(mesh.cells):
        g = list(loop)
        for s, e in enumerate(mesh.cell_edges[c]):
            v0, v1, _, _ = mesh.edges[e]
            a = loop[s]
            ids = [edge_base + e * (k - 1) + j for j in range(k - 1)]
            # canonical interior-node order runs v0 -> v1
            g.extend(ids if a == v0 else ids[::-1])
        g.extend(moment_base + c * n_mom + j for j in range(n_mom))
        cell_dofs.append(np.array(g, dtype=np.intp))

    boundary = np.zeros(n_dofs, dtype=bool)
    boundary[:nv] = mesh.boundary_vertex
    for e in range(ne):
        if mesh.boundary_edge[e]:
            boundary[edge_base + e * (k - 1): edge_base + (e + 1) * (k - 1)] = True
    return DofMap(
        k=k,
        n_dofs=n_dofs,
        n_vertex_dofs=nv,
        n_edge_dofs=(k - 1) * ne,
        n_moment_dofs=n_mom * nc,
        cell_dofs=tuple(cell_dofs),
        boundary=boundary,
    )


@lru_cache(maxsize=None)
def _lagrange_inverse(k: int) -> np.ndarray:
    """Inverse Vandermonde at the k+1 Gauss-Lobatto nodes on [0, 1]."""
    t = lobatto_points_01(k + 1)
    return np.linalg.inv(np.vander(t, k + 1, increasing=True))


def lagrange_eval(k: int, t: np.ndarray) -> np.ndarray:
    """Values of the k+1 Gauss-Lobatto Lagrange polynomials at parameters t."""
    V = np.vander(np.atleast_1d(t), k + 1, increasing=True)
    return V @ _lagrange_inverse(k)


@dataclass(frozen=True)
class LocalEdge:
    index: int            # global edge index
    boundary: bool
    p0: np.ndarray
    p1: np.ndarray        # traversal direction of this cell
    length: float
    normal: np.ndarray    # outward unit normal of this cell
    quad_points: np.ndarray
    quad_weights: np.ndarray
    trace: np.ndarray     # (n_quad, n_dofs): DoFs -> trace values at quad points


@dataclass(frozen=True)
class ProjectorSet:
    D: np.ndarray       # DoFs of the monomials, (n_dofs, n_poly)
    G: np.ndarray       # Pi-nabla Gram, (n_poly, n_poly)
    B: np.ndarray       # Pi-nabla load, (n_poly, n_dofs)
    pi_nabla: np.ndarray    # (n_poly, n_dofs)
    pi_zero: np.ndarray     # (n_poly, n_dofs)
    pi_zero_grad_x: np.ndarray  # (n_poly_lo, n_dofs)
    pi_zero_grad_y: np.ndarray


class VemElement:
    """One cell's basis, quadratures, traces and projectors."""

    def __init__(self, geom: ElementGeometry, k: int,
                 edge_ids: tuple[int, ...] | None = None,
                 edge_boundary: tuple[bool, ...] | None = None,
                 cell_index: int = -1):
        if k not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported degree {k}")
        self.geom = geom
        self.k = k
        self.cell_index = cell_index
        self.basis = MonomialBasis(k, geom.centroid, geom.diameter)
        self.n_poly = n_monomials(k)
        self.n_poly_lo = n_monomials(k - 1)
        self.n_mom = n_monomials(k - 2)
        m = len(geom.coords)
        self.n_vertices = m
        self.n_dofs = m * k + self.n_mom

        self._build_edges(edge_ids, edge_boundary)
        self._build_cell_quadrature()
        self._build_projectors()

    # -- construction -------------------------------------------------------

    def _edge_dof_slice(self, side: int) -> slice:
        m, k = self.n_vertices, self.k
        return slice(m + side * (k - 1), m + (side + 1) * (k - 1))

    def trace_matrix(self, side: int, t: np.ndarray) -> np.ndarray:
        """DoFs -> edge-polynomial values at parameters t in [0, 1] along the side."""
        m, k = self.n_vertices, self.k
        L = lagrange_eval(k, t)
        T = np.zeros((len(np.atleast_1d(t)), self.n_dofs))
        T[:, side] = L[:, 0]
        T[:, (side + 1) % m] = L[:, k]
        if k > 1:
            T[:, self._edge_dof_slice(side)] = L[:, 1:k]
        return T

    def _build_edges(self, edge_ids, edge_boundary):
        geom, k, m = self.geom, self.k, self.n_vertices
        nq = k + 2  # exact to degree 2k+3 on edges
        edges = []
        for s in range(m):
            p0, p1 = geom.coords[s], geom.coords[(s + 1) % m]
            rule = gauss_edge_rule(p0, p1, nq)
            t = np.linalg.norm(rule.points - p0, axis=1) / geom.edge_lengths[s]
            edges.append(LocalEdge(
                index=-1 if edge_ids is None else edge_ids[s],
                boundary=False if edge_boundary is None else edge_boundary[s],
                p0=p0, p1=p1,
                length=float(geom.edge_lengths[s]),
                normal=geom.normals[s],
                quad_points=rule.points,
                quad_weights=rule.weights,
                trace=self.trace_matrix(s, t),
            ))
        self.edges: list[LocalEdge] = edges

    def _build_cell_quadrature(self):
        q = build_cell_quadrature(self.geom, 2 * self.k + 2)
        self.quad_points = q.points
        self.quad_weights = q.weights
        self.M = monomial_values(self.basis, q.points)
        self.Gx, self.Gy = monomial_gradients(self.basis, q.points)

    def _build_projectors(self):
        geom, k = self.geom, self.k
        n_poly, n_dofs, m = self.n_poly, self.n_dofs, self.n_vertices
        area, h = geom.area, geom.diameter

        self.H = monomial_mass_matrix(geom, k)
        self.H_lo = self.H[: self.n_poly_lo, : self.n_poly_lo]

        # D: DoFs of each monomial
        D = np.zeros((n_dofs, n_poly))
        D[:m] = monomial_values(self.basis, geom.coords)
        for s, e in enumerate(self.edges):
            if k > 1:
                t = lobatto_points_01(k + 1)[1:-1]
                pts = e.p0[None, :] + t[:, None] * (e.p1 - e.p0)[None, :]
                D[self._edge_dof_slice(s)] = monomial_values(self.basis, pts)
        if self.n_mom:
            D[m * k:] = self.H[: self.n_mom] / area

        # Pi-nabla system
        perim = geom.edge_lengths.sum()
        Dx = monomial_derivative_map(k, 0)
        Dy = monomial_derivative_map(k, 1)
        G = (Dx.T @ self.H_lo @ Dx + Dy.T @ self.H_lo @ Dy) / h ** 2
        B = np.zeros((n_poly, n_dofs))
        lap = monomial_laplacian_map(k)  # (n_mom, n_poly)
        for e in self.edges:
            gx, gy = monomial_gradients(self.basis, e.quad_points)
            dn = gx * e.normal[0] + gy * e.normal[1]
            B += (dn * e.quad_weights[:, None]).T @ e.trace
        if self.n_mom:
            B[:, m * k:] -= area * lap.T / h ** 2
        # constant mode fixed by the boundary average
        bnd_avg_m = np.zeros(n_poly)
        bnd_avg_d = np.zeros(n_dofs)
        for e in self.edges:
            vals = monomial_values(self.basis, e.quad_points)
            bnd_avg_m += e.quad_weights @ vals
            bnd_avg_d += e.quad_weights @ e.trace
        G[0] = bnd_avg_m / perim
        B[0] = bnd_avg_d / perim

        try:
            pi_nabla = np.linalg.solve(G, B)
        except np.linalg.LinAlgError as exc:
            raise ProjectorError(
                f"singular Pi-nabla Gram on cell {self.cell_index}"
            ) from exc

        # Pi-zero: stored moments up to k-2, enhancement supplies degrees k-1, k
        C = np.zeros((n_poly, n_dofs))
        if self.n_mom:
            C[: self.n_mom, m * k:] = area * np.eye(self.n_mom)
        C[self.n_mom:] = (self.H @ pi_nabla)[self.n_mom:]
        try:
            pi_zero = np.linalg.solve(self.H, C)
        except np.linalg.LinAlgError as exc:
            raise ProjectorError(
                f"singular monomial mass matrix on cell {self.cell_index}"
            ) from exc

        # Vector L2 projection of the gradient via integration by parts
        Dx_lo = monomial_derivative_map(k - 1, 0)
        Dy_lo = monomial_derivative_map(k - 1, 1)
        Ex = np.zeros((self.n_poly_lo, n_dofs))
        Ey = np.zeros((self.n_poly_lo, n_dofs))
        for e in self.edges:
            vals = monomial_values(self.basis, e.quad_points)[:, : self.n_poly_lo]
            wv = (vals * e.quad_weights[:, None]).T @ e.trace
            Ex += e.normal[0] * wv
            Ey += e.normal[1] * wv
        if self.n_mom:
            # d/dx m_j for m_j up to degree k-1 has degree <= k-2: stored moments
            Ex[:, m * k:] -= area * Dx_lo.T[: self.n_poly_lo, : self.n_mom] / h
            Ey[:, m * k:] -= area * Dy_lo.T[: self.n_poly_lo, : self.n_mom] / h
        H_lo = self.H_lo
        pi_grad_x = np.linalg.solve(H_lo, Ex)
        pi_grad_y = np.linalg.solve(H_lo, Ey)

        self.projectors = ProjectorSet(
            D=D, G=G, B=B,
            pi_nabla=pi_nabla, pi_zero=pi_zero,
            pi_zero_grad_x=pi_grad_x, pi_zero_grad_y=pi_grad_y,
        )
        self.S_nabla_res = np.eye(n_dofs) - D @ pi_nabla
        self.S_zero_res = np.eye(n_dofs) - D @ pi_zero
        self.S_nabla = self.S_nabla_res.T @ self.S_nabla_res
        self.S_zero = self.S_zero_res.T @ self.S_zero_res

    # -- queries ------------------------------------------------------------

    def pi_zero_values(self, points: np.ndarray) -> np.ndarray:
        """(n_points, n_dofs) values of Pi0_k applied to each basis function."""
        return monomial_values(self.basis, points) @ self.projectors.pi_zero

    def pi_zero_grad_values(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gradients of the scalar projection Pi0_k at the given points."""
        gx, gy = monomial_gradients(self.basis, points)
        return gx @ self.projectors.pi_zero, gy @ self.projectors.pi_zero

    def evaluate_on_edge(self, dofs: np.ndarray, side: int,
                         points: np.ndarray) -> np.ndarray:
        """Evaluate the degree-k edge trace at 2D points lying on the side."""
        e = self.edges[side]
        d = e.p1 - e.p0
        pts = np.atleast_2d(points)
        t = (pts - e.p0) @ d / (e.length ** 2)
        off = pts - (e.p0 + t[:, None] * d)
        if np.abs(off).max() > 1e-10:
            raise ValueError("point does not lie on the requested edge")
        return self.trace_matrix(side, t) @ np.asarray(dofs, dtype=float)


def dofi_dofi(element: VemElement, projector: str, u: np.ndarray,
              v: np.ndarray) -> float:
    """Sum over local DoFs of products of the non-projected parts of u and v."""
    S = element.S_nabla if projector == "nabla" else element.S_zero
    return float(np.asarray(u) @ S @ np.asarray(v))


def build_elements(mesh: PolygonalMesh, k: int) -> list[VemElement]:
    out = []
    for c in range(mesh.n_cells):
        geom = element_geometry(mesh, c)
        ids = mesh.cell_edges[c]
        bnd = tuple(bool(mesh.boundary_edge[e]) for e in ids)
        out.append(VemElement(geom, k, edge_ids=ids, edge_boundary=bnd, cell_index=c))
    return out
