"""Shared fixtures: small meshes and elements reused across test modules."""

import numpy as np
import pytest

from cipvem.mesh import build_distorted_quad_mesh, build_voronoi_mesh
from cipvem.vemspace import build_elements


@pytest.fixture(scope="session")
def unit_square_mesh():
    return build_distorted_quad_mesh(1, 0.0, 0)


@pytest.fixture(scope="session")
def quad2_mesh():
    return build_distorted_quad_mesh(2, 0.0, 0)


@pytest.fixture(scope="session")
def quad3_mesh():
    return build_distorted_quad_mesh(3, 0.0, 0)


@pytest.fixture(scope="session")
def voro16_mesh():
    return build_voronoi_mesh(16, 20, 0)


@pytest.fixture(scope="session")
def voro64_mesh():
    return build_voronoi_mesh(64, 20, 0)


@pytest.fixture(scope="session")
def unit_square_element(unit_square_mesh):
    return build_elements(unit_square_mesh, 1)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
