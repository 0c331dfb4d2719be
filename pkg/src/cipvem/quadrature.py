"""Scaled monomial bases and polynomial-exact integration on polygons and edges."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .mesh import ElementGeometry, is_simple_polygon


def monomial_exponents(k: int) -> list[tuple[int, int]]:
    """(alpha, beta) with alpha + beta <= k, graded, x-power first within a degree."""
    out = []
    for d in range(k + 1):
        for b in range(d + 1):
            out.append((d - b, b))
    return out


def n_monomials(k: int) -> int:
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials ((x - x_E)/h_E)^a ((y - y_E)/h_E)^b with a + b <= degree."""

    degree: int
    centroid: np.ndarray
    diameter: float

    @property
    def exponents(self) -> list[tuple[int, int]]:
        return monomial_exponents(self.degree)

    @property
    def size(self) -> int:
        return n_monomials(self.degree)


def scaled_coords(basis: MonomialBasis, points: np.ndarray) -> np.ndarray:
    return (np.atleast_2d(points) - basis.centroid) / basis.diameter


def monomial_values(basis: MonomialBasis, points: np.ndarray) -> np.ndarray:
    """Matrix (n_points, n_monomials) of monomial values."""
    s = scaled_coords(basis, points)
    xp = np.vander(s[:, 0], basis.degree + 1, increasing=True)
    yp = np.vander(s[:, 1], basis.degree + 1, increasing=True)
    return np.column_stack([xp[:, a] * yp[:, b] for a, b in basis.exponents])


def monomial_gradients(
    basis: MonomialBasis, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic d/dx and d/dy of every monomial at the given points."""
    s = scaled_coords(basis, points)
    h = basis.diameter
    xp = np.vander(s[:, 0], basis.degree + 1, increasing=True)
    yp = np.vander(s[:, 1], basis.degree + 1, increasing=True)
    gx, gy = [], []
    for a, b in basis.exponents:
        gx.append((a / h) * xp[:, a - 1] * yp[:, b] if a > 0 else np.zeros(len(s)))
        gy.append((b / h) * xp[:, a] * yp[:, b - 1] if b > 0 else np.zeros(len(s)))
    return np.column_stack(gx), np.column_stack(gy)


def monomial_derivative_map(k: int, axis: int) -> np.ndarray:
    """Coefficient matrix of d/dx (axis=0) or d/dy on the degree-k monomial basis.

    Entry (i, j): coefficient of monomial i (degree k-1 list) in the derivative
    of monomial j, up to the 1/h_E scaling which the caller applies.
    """
    exps_k = monomial_exponents(k)
    exps_lo = monomial_exponents(k - 1) if k >= 1 else []
    idx = {e: i for i, e in enumerate(exps_lo)}
    D = np.zeros((len(exps_lo), len(exps_k)))
    for j, (a, b) in enumerate(exps_k):
        if axis == 0 and a > 0:
            D[idx[(a - 1, b)], j] = a
        if axis == 1 and b > 0:
            D[idx[(a, b - 1)], j] = b
    return D


def monomial_laplacian_map(k: int) -> np.ndarray:
    """Coefficients of Delta m_j on the degree-(k-2) monomial list (1/h_E^2 applied by caller)."""
    exps_k = monomial_exponents(k)
    exps_lo = monomial_exponents(k - 2) if k >= 2 else []
    idx = {e: i for i, e in enumerate(exps_lo)}
    L = np.zeros((len(exps_lo), len(exps_k)))
    for j, (a, b) in enumerate(exps_k):
        if a >= 2:
            L[idx[(a - 2, b)], j] += a * (a - 1)
        if b >= 2:
            L[idx[(a, b - 2)], j] += b * (b - 1)
    return L


# ---------------------------------------------------------------------------
# Edge rules


@dataclass(frozen=True)
class EdgeQuadrature:
    points: np.ndarray   # (n, 2) Gauss points on the edge
    weights: np.ndarray  # sum to the edge length
    exactness: int


@lru_cache(maxsize=None)
def _gauss_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def gauss_edge_rule(p0: np.ndarray, p1: np.ndarray, n_points: int) -> EdgeQuadrature:
    t, w = _gauss_01(n_points)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    return EdgeQuadrature(points=pts, weights=w * length, exactness=2 * n_points - 1)


@lru_cache(maxsize=None)
def lobatto_points_01(n: int) -> np.ndarray:
    """The n Gauss-Lobatto nodes on [0, 1] (endpoints included)."""
    if n < 2:
        raise ValueError("Lobatto rule needs at least 2 nodes")
    if n == 2:
        inner = np.array([])
    else:
        dP = legendre.Legendre.basis(n - 1).deriv()
        inner = np.sort(dP.roots().real)
    x = np.concatenate([[-1.0], inner, [1.0]])
    return (x + 1.0) / 2.0


def gauss_lobatto_edge_points(p0: np.ndarray, p1: np.ndarray, k: int) -> np.ndarray:
    """The k-1 interior Gauss-Lobatto nodes of the (k+1)-node rule on the edge."""
    if k < 1:
        raise ValueError("degree must be >= 1")
    if k == 1:
        return np.zeros((0, 2))
    t = lobatto_points_01(k + 1)[1:-1]
    return np.asarray(p0)[None, :] + t[:, None] * (np.asarray(p1) - np.asarray(p0))[None, :]


# ---------------------------------------------------------------------------
# Cell rules


@dataclass(frozen=True)
class CellQuadrature:
    points: np.ndarray
    weights: np.ndarray
    exactness: int


def _ear_clip(coords: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple ccw polygon by ear clipping."""
    idx = list(range(len(coords)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def point_in_tri(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return (d1 >= 0) and (d2 >= 0) and (d3 >= 0)

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise ValueError("ear clipping failed; polygon may not be simple")
        m = len(idx)
        clipped = False
        for i in range(m):
            ia, ib, ic = idx[(i - 1) % m], idx[i], idx[(i + 1) % m]
            a, b, c = coords[ia], coords[ib], coords[ic]
            if cross(a, b, c) <= 0:
                continue
            if any(
                point_in_tri(coords[j], a, b, c)
                for j in idx
                if j not in (ia, ib, ic)
            ):
                continue
            tris.append((ia, ib, ic))
            idx.pop(i)
            clipped = True
            break
        if not clipped:
            raise ValueError("ear clipping failed; polygon may not be simple")
    tris.append(tuple(idx))
    return tris


def _is_convex(coords: np.ndarray) -> bool:
    d = np.roll(coords, -1, axis=0) - coords
    cr = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    return bool((cr > -1e-14 * np.abs(cr).max()).all())


@lru_cache(maxsize=None)
def _duffy_rule(exactness: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on the reference triangle (0,0)-(1,0)-(0,1), polynomial-exact."""
    n = (exactness + 2 + 1) // 2  # covers degree exactness+1 after the Duffy map
    u, wu = _gauss_01(n)
    v, wv = _gauss_01(n)
    U, V = np.meshgrid(u, v)
    W = np.outer(wv, wu) * (1.0 - U)
    X = U
    Y = V * (1.0 - U)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def build_cell_quadrature(geom: ElementGeometry, exactness: int) -> CellQuadrature:
    """Triangulate the polygon and place a Gauss rule on each triangle."""
    coords = geom.coords
    if not is_simple_polygon(coords):
        raise ValueError("cell quadrature requires a simple polygon")
    ref_pts, ref_w = _duffy_rule(exactness)
    if _is_convex(coords):
        tris = [
            (coords[0], coords[i], coords[i + 1]) for i in range(1, len(coords) - 1)
        ]
    else:
        tris = [
            (coords[a], coords[b], coords[c]) for a, b, c in _ear_clip(coords)
        ]
    pts, ws = [], []
    for a, b, c in tris:
        J = np.column_stack([b - a, c - a])
        detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        pts.append(a[None, :] + ref_pts @ J.T)
        ws.append(ref_w * detJ)
    return CellQuadrature(
        points=np.vstack(pts), weights=np.concatenate(ws), exactness=exactness
    )


# ---------------------------------------------------------------------------
# Exact polynomial moments (divergence-theorem edge recursion)


def monomial_cell_moments(geom: ElementGeometry, max_degree: int) -> np.ndarray:
    """Exact integrals over the polygon of every scaled monomial up to max_degree.

    Uses int_E m_{ab} = h_E/(a+1) * sum_edges int_e m_{a+1,b} n_x ds with
    Gauss rules on the straight edges, which is exact; independent of the
    triangulated cell quadrature.
    """
    basis_hi = MonomialBasis(max_degree + 1, geom.centroid, geom.diameter)
    exps_hi = {e: i for i, e in enumerate(basis_hi.exponents)}
    n_gauss = (max_degree + 1) // 2 + 2
    m = len(geom.coords)
    boundary = np.zeros(basis_hi.size)
    for s in range(m):
        p0, p1 = geom.coords[s], geom.coords[(s + 1) % m]
        rule = gauss_edge_rule(p0, p1, n_gauss)
        vals = monomial_values(basis_hi, rule.points)
        boundary += geom.normals[s, 0] * (rule.weights @ vals)
    out = np.empty(n_monomials(max_degree))
    for i, (a, b) in enumerate(monomial_exponents(max_degree)):
        out[i] = geom.diameter / (a + 1) * boundary[exps_hi[(a + 1, b)]]
    return out


def monomial_mass_matrix(geom: ElementGeometry, k: int) -> np.ndarray:
    """Exact Gram matrix int_E m_i m_j for monomials up to degree k."""
    moments = monomial_cell_moments(geom, 2 * k)
    idx = {e: i for i, e in enumerate(monomial_exponents(2 * k))}
    exps = monomial_exponents(k)
    H = np.empty((len(exps), len(exps)))
    for i, (a1, b1) in enumerate(exps):
        for j in range(i, len(exps)):
            a2, b2 = exps[j]
            H[i, j] = H[j, i] = moments[idx[(a1 + a2, b1 + b2)]]
    return H
