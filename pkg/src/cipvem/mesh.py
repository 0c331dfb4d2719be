"""Polygonal meshes of the unit square: Voronoi and distorted-quad families.

Meshes are immutable after construction.  Cells are counter-clockwise
vertex loops; edges carry two-cell adjacency with BOUNDARY = -1 marking
boundary edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi, cKDTree

BOUNDARY = -1

_SNAP = 1e-9


class MeshError(Exception):
    pass


@dataclass(frozen=True)
class PolygonalMesh:
    """Vertices, ccw cells and oriented edges of a polygonal tessellation.

    ``edges[i] = (v0, v1, left, right)``: the left cell traverses the edge
    as v0 -> v1; ``right`` is BOUNDARY for boundary edges.
    """

    vertices: np.ndarray                 # (n_vertices, 2)
    cells: tuple[tuple[int, ...], ...]   # ccw vertex loops
    edges: tuple[tuple[int, int, int, int], ...]
    boundary_vertex: np.ndarray          # (n_vertices,) bool
    boundary_edge: np.ndarray            # (n_edges,) bool
    cell_edges: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def cell_coords(self, c: int) -> np.ndarray:
        return self.vertices[list(self.cells[c])]


@dataclass(frozen=True)
class ElementGeometry:
    """Per-cell geometric quantities used by bases, quadrature and forms."""

    coords: np.ndarray        # ccw vertex coordinates, (m, 2)
    area: float
    diameter: float
    centroid: np.ndarray      # (2,)
    edge_lengths: np.ndarray  # (m,)
    normals: np.ndarray       # (m, 2) outward unit normals, side i = v_i -> v_{i+1}


@dataclass(frozen=True)
class MeshQualityReport:
    rho_edge: float
    rho_ball: float
    rho_uniform: float
    threshold: float
    passed: bool
    worst_edge_cell: int
    worst_ball_cell: int
    worst_uniform_cell: int


def polygon_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(coords: np.ndarray) -> np.ndarray:
    x, y = coords[:, 0], coords[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cross = x * ys - xs * y
    a = 0.5 * cross.sum()
    cx = ((x + xs) * cross).sum() / (6.0 * a)
    cy = ((y + ys) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(coords: np.ndarray) -> float:
    d = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection test for open segments p1p2 and p3p4."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def is_simple_polygon(coords: np.ndarray) -> bool:
    m = len(coords)
    for i in range(m):
        a, b = coords[i], coords[(i + 1) % m]
        for j in range(i + 1, m):
            if j == i or (j + 1) % m == i or (i + 1) % m == j:
                continue
            c, d = coords[j], coords[(j + 1) % m]
            if _segments_intersect(a, b, c, d):
                return False
    return True


def element_geometry(mesh: PolygonalMesh, c: int) -> ElementGeometry:
    coords = mesh.cell_coords(c)
    area = polygon_area(coords)
    if area <= 0.0:
        raise MeshError(f"cell {c} has non-positive area {area}")
    deltas = np.roll(coords, -1, axis=0) - coords
    lengths = np.sqrt((deltas ** 2).sum(-1))
    normals = np.column_stack([deltas[:, 1], -deltas[:, 0]]) / lengths[:, None]
    return ElementGeometry(
        coords=coords,
        area=area,
        diameter=polygon_diameter(coords),
        centroid=polygon_centroid(coords),
        edge_lengths=lengths,
        normals=normals,
    )


def mesh_size(mesh: PolygonalMesh) -> float:
    """Global mesh parameter h = max cell diameter."""
    return max(polygon_diameter(mesh.cell_coords(c)) for c in range(mesh.n_cells))


# ---------------------------------------------------------------------------
# Mesh construction from cell loops


def _build_mesh(vertices: np.ndarray, cells: list[list[int]]) -> PolygonalMesh:
    vertices = np.asarray(vertices, dtype=float)
    edge_of: dict[tuple[int, int], int] = {}
    edges: list[list[int]] = []
    cell_edges: list[tuple[int, ...]] = []
    for ci, loop in enumerate(cells):
        coords = vertices[loop]
        if polygon_area(coords) <= 0.0:
            raise MeshError(f"cell {ci} is not counter-clockwise / has no area")
        if not is_simple_polygon(coords):
            raise MeshError(f"cell {ci} is self-intersecting")
        local = []
        m = len(loop)
        for s in range(m):
            a, b = loop[s], loop[(s + 1) % m]
            key = (min(a, b), max(a, b))
            if key not in edge_of:
                edge_of[key] = len(edges)
                edges.append([a, b, ci, BOUNDARY])
            else:
                e = edges[edge_of[key]]
                if (e[0], e[1]) != (b, a):
                    raise MeshError(
                        f"edge {key} traversed twice in the same direction"
                    )
                if e[3] != BOUNDARY:
                    raise MeshError(f"edge {key} adjacent to more than two cells")
                e[3] = ci
            local.append(edge_of[key])
        cell_edges.append(tuple(local))

    boundary_edge = np.array([e[3] == BOUNDARY for e in edges])
    boundary_vertex = np.zeros(len(vertices), dtype=bool)
    for e, is_b in zip(edges, boundary_edge):
        if is_b:
            boundary_vertex[e[0]] = True
            boundary_vertex[e[1]] = True

    mesh = PolygonalMesh(
        vertices=vertices,
        cells=tuple(tuple(c) for c in cells),
        edges=tuple(tuple(e) for e in edges),
        boundary_vertex=boundary_vertex,
        boundary_edge=boundary_edge,
        cell_edges=tuple(cell_edges),
    )
    total = sum(polygon_area(mesh.cell_coords(c)) for c in range(mesh.n_cells))
    if abs(total - 1.0) > 1e-10:
        raise MeshError(f"cell areas sum to {total}, expected 1.0")
    return mesh


# ---------------------------------------------------------------------------
# Voronoi family


def _mirrored(seeds: np.ndarray) -> np.ndarray:
    # Reflections across the four sides clip every interior cell to the square.
    left = seeds * np.array([-1.0, 1.0])
    right = seeds * np.array([-1.0, 1.0]) + np.array([2.0, 0.0])
    bottom = seeds * np.array([1.0, -1.0])
    top = seeds * np.array([1.0, -1.0]) + np.array([0.0, 2.0])
    return np.vstack([seeds, left, right, bottom, top])


def _voronoi_cells(seeds: np.ndarray) -> list[np.ndarray]:
    """Coordinates of the Voronoi cell of each seed, clipped to the square."""
    n = len(seeds)
    if n == 1:
        return [np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])]
    vor = Voronoi(_mirrored(seeds))
    out = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError(f"unbounded Voronoi region for seed {i}")
        coords = vor.vertices[region]
        coords = np.clip(coords, 0.0, 1.0)
        coords[np.abs(coords) < _SNAP] = 0.0
        coords[np.abs(coords - 1.0) < _SNAP] = 1.0
        if polygon_area(coords) < 0.0:
            coords = coords[::-1]
        out.append(coords)
    return out


def _check_seeds(seeds: np.ndarray) -> None:
    if len(seeds) < 2:
        return
    tree = cKDTree(seeds)
    d, _ = tree.query(seeds, k=2)
    dmin = d[:, 1].min()
    if dmin < 1e-9:
        raise MeshError(
            f"degenerate seed set: minimum seed separation {dmin:.3e}; reseed"
        )


def _assemble_from_polygons(polys: list[np.ndarray]) -> PolygonalMesh:
    """Merge per-cell coordinate loops into a shared-vertex mesh."""
    index: dict[tuple[int, int], int] = {}
    vertices: list[np.ndarray] = []
    cells: list[list[int]] = []
    for coords in polys:
        loop = []
        for p in coords:
            key = (round(p[0] / _SNAP), round(p[1] / _SNAP))
            if key not in index:
                index[key] = len(vertices)
                vertices.append(p)
            vi = index[key]
            if not loop or loop[-1] != vi:
                loop.append(vi)
        if len(loop) > 1 and loop[0] == loop[-1]:
            loop.pop()
        if len(loop) < 3:
            raise MeshError("degenerate cell after vertex merging")
        cells.append(loop)
    return _build_mesh(np.array(vertices), cells)


def build_voronoi_mesh(
    n_cells: int, lloyd_iterations: int = 0, rng_seed: int = 0
) -> PolygonalMesh:
    """Clipped Voronoi diagram of random seeds, relaxed by Lloyd iterations."""
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    rng = np.random.default_rng(rng_seed)
    seeds = rng.uniform(0.05, 0.95, size=(n_cells, 2))
    _check_seeds(seeds)
    for _ in range(lloyd_iterations):
        polys = _voronoi_cells(seeds)
        seeds = np.array([polygon_centroid(p) for p in polys])
        _check_seeds(seeds)
    return _assemble_from_polygons(_voronoi_cells(seeds))


def lloyd_gap(mesh_seeds: np.ndarray, polys: list[np.ndarray]) -> float:
    """Max distance between each seed and the centroid of its cell."""
    cents = np.array([polygon_centroid(p) for p in polys])
    return float(np.sqrt(((cents - mesh_seeds) ** 2).sum(-1)).max())


# ---------------------------------------------------------------------------
# Distorted quadrilateral family


def build_distorted_quad_mesh(
    n_per_side: int, distortion: float = 0.0, rng_seed: int = 0
) -> PolygonalMesh:
    """n x n structured quads with interior vertices randomly displaced.

    Displacement magnitude is at most distortion / n_per_side; boundary
    vertices are kept fixed so the domain stays the unit square.
    """
    if n_per_side < 1:
        raise ValueError("n_per_side must be >= 1")
    if not (0.0 <= distortion < 0.4):
        raise ValueError("distortion must lie in [0, 0.4)")
    n = n_per_side
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    rng = np.random.default_rng(rng_seed)
    h = 1.0 / n
    interior = np.zeros(len(verts), dtype=bool)
    for j in range(1, n):
        for i in range(1, n):
            interior[j * (n + 1) + i] = True
    m = int(interior.sum())
    if m and distortion > 0.0:
        theta = rng.uniform(0.0, 2.0 * np.pi, m)
        r = distortion * h * np.sqrt(rng.uniform(0.0, 1.0, m))
        verts[interior] += np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    cells = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            cells.append([v0, v0 + 1, v0 + n + 2, v0 + n + 1])
    for ci, loop in enumerate(cells):
        coords = verts[loop]
        if polygon_area(coords) <= 0.0 or not is_simple_polygon(coords):
            raise MeshError(f"cell {ci} inverted or self-intersecting after perturbation")
    return _build_mesh(verts, cells)


# ---------------------------------------------------------------------------
# Quality and adjacency queries


def _chebyshev_radius(coords: np.ndarray) -> float:
    """Inradius of the polygon via the largest inscribed ball (LP over half-planes)."""
    deltas = np.roll(coords, -1, axis=0) - coords
    lengths = np.sqrt((deltas ** 2).sum(-1))
    normals = np.column_stack([deltas[:, 1], -deltas[:, 0]]) / lengths[:, None]
    # n . x <= n . p  for each edge through p; maximize r with n . x + r <= n . p
    A = np.column_stack([normals, np.ones(len(coords))])
    b = (normals * coords).sum(-1)
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=A, b_ub=b, bounds=[(None, None)] * 3,
                  method="highs")
    if not res.success:
        raise MeshError("Chebyshev-center LP failed")
    return float(res.x[2])


def check_mesh_assumptions(mesh: PolygonalMesh, rho: float) -> MeshQualityReport:
    """Shape-regularity ratios against a user threshold rho."""
    diameters = np.empty(mesh.n_cells)
    rho_edge = np.empty(mesh.n_cells)
    rho_ball = np.empty(mesh.n_cells)
    for c in range(mesh.n_cells):
        geom = element_geometry(mesh, c)
        diameters[c] = geom.diameter
        rho_edge[c] = geom.edge_lengths.min() / geom.diameter
        rho_ball[c] = _chebyshev_radius(geom.coords) / geom.diameter
    h = diameters.max()
    rho_uniform = diameters / h
    passed = (
        rho_edge.min() >= rho and rho_ball.min() >= rho and rho_uniform.min() >= rho
    )
    return MeshQualityReport(
        rho_edge=float(rho_edge.min()),
        rho_ball=float(rho_ball.min()),
        rho_uniform=float(rho_uniform.min()),
        threshold=rho,
        passed=bool(passed),
        worst_edge_cell=int(rho_edge.argmin()),
        worst_ball_cell=int(rho_ball.argmin()),
        worst_uniform_cell=int(rho_uniform.argmin()),
    )


def vertex_cells(mesh: PolygonalMesh) -> list[list[int]]:
    inc: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for c, loop in enumerate(mesh.cells):
        for v in loop:
            inc[v].append(c)
    return inc


def element_patch(mesh: PolygonalMesh, cell: int) -> set[int]:
    """All cells sharing at least one vertex with the given cell (incl. itself)."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    inc = vertex_cells(mesh)
    out: set[int] = set()
    for v in mesh.cells[cell]:
        out.update(inc[v])
    return out


def edge_patch(mesh: PolygonalMesh, cell: int) -> set[int]:
    """Edges with at least one endpoint among the cell's vertices."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    vs = set(mesh.cells[cell])
    return {
        i for i, (a, b, _, _) in enumerate(mesh.edges) if a in vs or b in vs
    }


# ---------------------------------------------------------------------------
# Plain-text mesh format


def write_mesh(mesh: PolygonalMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"vem-mesh v1 {mesh.n_vertices} {mesh.n_cells}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for loop in mesh.cells:
            fh.write(" ".join([str(len(loop))] + [str(v) for v in loop]) + "\n")


def read_mesh(path) -> PolygonalMesh:
    with open(path) as fh:
        header = fh.readline().split()
        if header[:2] != ["vem-mesh", "v1"]:
            raise MeshError(f"unrecognized mesh header: {' '.join(header)}")
        nv, nc = int(header[2]), int(header[3])
        vertices = np.array(
            [[float(t) for t in fh.readline().split()] for _ in range(nv)]
        )
        cells = []
        for _ in range(nc):
            toks = [int(t) for t in fh.readline().split()]
            if toks[0] != len(toks) - 1:
                raise MeshError("malformed cell line")
            cells.append(toks[1:])
    return _build_mesh(vertices, cells)
