"""CIP-stabilized virtual element solver for advection-diffusion-reaction
problems on polygonal meshes of the unit square."""

from .mesh import (
    PolygonalMesh,
    build_distorted_quad_mesh,
    build_voronoi_mesh,
    check_mesh_assumptions,
    edge_patch,
    element_patch,
    read_mesh,
    write_mesh,
)
from .system import Discretization, assemble, solve
from .experiments import (
    cip_ab_comparison,
    compute_errors,
    convergence_study,
    manufactured_problem,
)

__version__ = "0.1.0"

__all__ = [
    "PolygonalMesh",
    "build_voronoi_mesh",
    "build_distorted_quad_mesh",
    "check_mesh_assumptions",
    "element_patch",
    "edge_patch",
    "read_mesh",
    "write_mesh",
    "Discretization",
    "assemble",
    "solve",
    "manufactured_problem",
    "compute_errors",
    "convergence_study",
    "cip_ab_comparison",
    "__version__",
]
