"""Local bilinear forms, CIP terms, Nitsche terms, loads and Oswald averaging."""

import math

import numpy as np
import pytest

from cipvem.forms import (
    cell_gamma,
    cip_edge_jump,
    cip_norm,
    cip_volume_stab,
    constant_field,
    edge_gamma,
    linear_field,
    local_advection_skew,
    local_diffusion,
    local_load,
    local_reaction,
    nitsche_boundary,
    nitsche_data_load,
    oswald_interpolate,
    trig_field,
    _edge_incidence,
)
from cipvem.vemspace import build_dof_map, build_elements

from test_vemspace import interpolate

BETA = constant_field([1.0, 0.5])
ZERO = constant_field([0.0, 0.0])
SQ2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Advection fields


def test_constant_field_divergence_free(rng):
    pts = rng.uniform(size=(20, 2))
    assert BETA.check_divergence_free(pts) == 0.0
    assert np.allclose(BETA(pts), [1.0, 0.5])


def test_trig_field_divergence_free(rng):
    pts = rng.uniform(size=(20, 2))
    assert trig_field().check_divergence_free(pts, tol=1e-12) <= 1e-12


def test_linear_field_requires_zero_trace():
    with pytest.raises(ValueError):
        linear_field([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0])
    fld = linear_field([[0.0, 1.0], [2.0, 0.0]], [0.5, 0.5])
    assert np.allclose(fld(np.array([[1.0, 1.0]])), [[1.5, 2.5]])


# ---------------------------------------------------------------------------
# Diffusion form


def test_diffusion_kernel_contains_constants(voro16_mesh):
    for el in build_elements(voro16_mesh, 2):
        A = local_diffusion(el)
        assert np.allclose(A @ np.ones(el.n_dofs), 0.0, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_diffusion_polynomial_consistency(voro16_mesh, k):
    # a_h(p, q) = int grad p . grad q for p, q in P_k (stabilization vanishes)
    for el in build_elements(voro16_mesh, k)[:4]:
        A = local_diffusion(el)
        D = el.projectors.D
        from cipvem.quadrature import monomial_gradients

        gx, gy = monomial_gradients(el.basis, el.quad_points)
        w = el.quad_weights
        exact = gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy)
        assert np.allclose(D.T @ A @ D, exact, atol=1e-11)


def test_diffusion_unit_square_matrix(unit_square_element):
    # closed-form k=1 matrix of the square: 3/4 diagonal, -1/4 elsewhere
    A = local_diffusion(unit_square_element)
    oracle = 0.75 * np.eye(4) - 0.25 * (np.ones((4, 4)) - np.eye(4))
    assert np.allclose(A, oracle, atol=1e-13)


# ---------------------------------------------------------------------------
# Skew advection form


def test_advection_skew_symmetry(voro16_mesh, rng):
    el = build_elements(voro16_mesh, 2)[0]
    B = local_advection_skew(el, BETA)
    assert np.allclose(B, -B.T, atol=1e-14)
    for _ in range(10):
        v = rng.standard_normal(el.n_dofs)
        assert v @ B @ v == pytest.approx(0.0, abs=1e-12)


def test_advection_zero_field(voro16_mesh):
    el = build_elements(voro16_mesh, 1)[0]
    assert np.allclose(local_advection_skew(el, ZERO), 0.0, atol=1e-15)


def test_advection_value_unit_square(unit_square_element):
    # b(m_10, 1) = int beta . grad m_10 = 1/sqrt(2); b(1, m_10) = 0, so the
    # skew form evaluates to half of that
    el = unit_square_element
    B = local_advection_skew(el, BETA)
    u = el.projectors.D[:, 1]
    v = np.ones(el.n_dofs)
    # rows index the test function: form value b(u, v) is v^T B u
    assert v @ B @ u == pytest.approx(0.5 / SQ2, abs=1e-13)


# ---------------------------------------------------------------------------
# Reaction form


def test_reaction_polynomial_consistency(voro16_mesh):
    el = build_elements(voro16_mesh, 2)[0]
    C = local_reaction(el)
    D = el.projectors.D
    assert np.allclose(D.T @ C @ D, el.H, atol=1e-12)


def test_reaction_positive_definite(voro16_mesh, rng):
    el = build_elements(voro16_mesh, 1)[0]
    C = local_reaction(el)
    for _ in range(10):
        v = rng.standard_normal(el.n_dofs)
        assert v @ C @ v > 0.0


def test_reaction_constant_gives_area(voro16_mesh):
    el = build_elements(voro16_mesh, 2)[0]
    ones = np.ones(el.n_dofs)
    # moment DoF of the constant 1 is 1, vertex/edge values are 1: the dofi
    # part vanishes and only int_E 1 = |E| remains
    ones_dofs = interpolate(el, lambda p: np.ones(len(np.atleast_2d(p))))
    val = ones_dofs @ local_reaction(el) @ ones_dofs
    assert val == pytest.approx(el.geom.area, abs=1e-12)
    del ones


# ---------------------------------------------------------------------------
# CIP jump term


def test_gamma_edge_values(unit_square_element):
    el = unit_square_element
    # side 0: bottom, n = (0, -1): |beta . n| = 0.5; side 1: right, n = (1, 0)
    assert edge_gamma(el, 0, BETA) == pytest.approx(0.5)
    assert edge_gamma(el, 1, BETA) == pytest.approx(1.0)
    assert cell_gamma(el, BETA) == pytest.approx(1.0)


def test_cip_jump_vanishes_on_affine(quad2_mesh):
    elements = build_elements(quad2_mesh, 1)
    dm = build_dof_map(quad2_mesh, 1)
    incidence = _edge_incidence(quad2_mesh)
    lin = lambda p: 0.2 + np.atleast_2d(p)[:, 0] - 2.0 * np.atleast_2d(p)[:, 1]
    global_dofs = lin(quad2_mesh.vertices)
    for ei in range(quad2_mesh.n_edges):
        if quad2_mesh.boundary_edge[ei]:
            continue
        (cl, sl), (cr, sr) = incidence[ei]
        M, gamma = cip_edge_jump(elements[cl], sl, elements[cr], sr, BETA)
        uu = np.concatenate([global_dofs[dm.cell_dofs[cl]],
                             global_dofs[dm.cell_dofs[cr]]])
        assert uu @ M @ uu == pytest.approx(0.0, abs=1e-13)
        assert gamma > 0.0


def test_cip_jump_boundary_edge_rejected(quad2_mesh):
    elements = build_elements(quad2_mesh, 1)
    bnd_side = next(s for s, e in enumerate(elements[0].edges) if e.boundary)
    with pytest.raises(ValueError):
        cip_edge_jump(elements[0], bnd_side, elements[0], bnd_side, BETA)


def test_cip_jump_psd(quad2_mesh, rng):
    elements = build_elements(quad2_mesh, 2)
    incidence = _edge_incidence(quad2_mesh)
    ei = next(i for i in range(quad2_mesh.n_edges)
              if not quad2_mesh.boundary_edge[i])
    (cl, sl), (cr, sr) = incidence[ei]
    M, _ = cip_edge_jump(elements[cl], sl, elements[cr], sr, BETA)
    for _ in range(20):
        v = rng.standard_normal(len(M))
        assert v @ M @ v >= -1e-14


def test_cip_volume_stab(voro16_mesh, rng):
    el = build_elements(voro16_mesh, 2)[0]
    S = cip_volume_stab(el, BETA)
    assert np.allclose(cip_volume_stab(el, ZERO), 0.0, atol=1e-15)
    D = el.projectors.D
    for j in range(el.n_poly):
        assert D[:, j] @ S @ D[:, j] == pytest.approx(0.0, abs=1e-11)
    for _ in range(10):
        v = rng.standard_normal(el.n_dofs)
        assert v @ S @ v >= 0.0


# ---------------------------------------------------------------------------
# Nitsche terms


def test_nitsche_interior_cell_is_zero(quad3_mesh):
    elements = build_elements(quad3_mesh, 1)
    interior = next(el for el in elements
                    if not any(e.boundary for e in el.edges))
    A = nitsche_boundary(interior, BETA, 1.0, 0.1)
    assert np.allclose(A, 0.0, atol=1e-15)


def test_nitsche_zero_coefficients(unit_square_mesh):
    el = build_elements(unit_square_mesh, 1)[0]
    A = nitsche_boundary(el, ZERO, 0.0, 0.1)
    assert np.allclose(A, 0.0, atol=1e-15)


def test_nitsche_penalty_block(unit_square_mesh):
    # with beta = 0 the delta-dependence isolates the penalty term
    # (1/(delta h_E)) * boundary mass matrix of the bilinear traces
    el = build_elements(unit_square_mesh, 1)[0]
    A1 = nitsche_boundary(el, ZERO, 1.0, 0.1)
    A2 = nitsche_boundary(el, ZERO, 1.0, 0.2)
    Mb = np.zeros((4, 4))
    for i in range(4):
        j = (i + 1) % 4
        Mb[i, i] += 1.0 / 3.0
        Mb[j, j] += 1.0 / 3.0
        Mb[i, j] += 1.0 / 6.0
        Mb[j, i] += 1.0 / 6.0
    scale = (1.0 / 0.1 - 1.0 / 0.2) / SQ2
    assert np.allclose(A1 - A2, scale * Mb, atol=1e-13)


def test_nitsche_data_load_zero_data(unit_square_mesh):
    el = build_elements(unit_square_mesh, 1)[0]
    F = nitsche_data_load(el, BETA, 1.0, 0.1, lambda p: np.zeros(len(p)))
    assert np.allclose(F, 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# Load


def test_load_zero(voro16_mesh):
    el = build_elements(voro16_mesh, 2)[0]
    F = local_load(el, lambda p: np.zeros(len(p)))
    assert np.allclose(F, 0.0, atol=1e-15)


def test_load_constant_unit_square(unit_square_element):
    F = local_load(unit_square_element, lambda p: np.ones(len(p)))
    assert np.allclose(F, 0.25, atol=1e-13)


def test_load_self_adjointness(voro16_mesh, rng):
    # int f Pi0 v = int (Pi0 f) v for polynomial f: test via the projector
    el = build_elements(voro16_mesh, 2)[0]
    f = lambda p: 1.0 + np.atleast_2d(p)[:, 0] ** 2
    F = local_load(el, f)
    f_dofs = interpolate(el, f)
    w = el.quad_weights
    Pv = el.M @ el.projectors.pi_zero
    alt = ((Pv @ f_dofs) * w) @ Pv
    assert np.allclose(F, alt, atol=1e-12)


# ---------------------------------------------------------------------------
# Oswald quasi-interpolation


def test_oswald_identity_on_continuous(quad2_mesh):
    dm = build_dof_map(quad2_mesh, 2)
    elements = build_elements(quad2_mesh, 2)
    # same global polynomial in every cell, expressed per cell
    poly = lambda p: 1.0 + np.atleast_2d(p)[:, 0] + np.atleast_2d(p)[:, 1] ** 2
    coeffs = []
    for el in elements:
        dofs = interpolate(el, poly)
        coeffs.append(el.projectors.pi_zero @ dofs)
    out = oswald_interpolate(quad2_mesh, dm, elements, np.array(coeffs))
    expect = np.concatenate([
        poly(quad2_mesh.vertices),
        *(interpolate(el, poly)[el.n_vertices:] for el in elements),
    ])
    # global layout: vertices, then edges, then moments; rebuild via cell map
    ref = np.zeros(dm.n_dofs)
    for c, el in enumerate(elements):
        ref[dm.cell_dofs[c]] = interpolate(el, poly)
    assert np.allclose(out, ref, atol=1e-12)
    del expect


def test_oswald_equal_area_average(quad2_mesh):
    dm = build_dof_map(quad2_mesh, 1)
    elements = build_elements(quad2_mesh, 1)
    # alternate constants 3 and 5 over the four equal-area cells: the center
    # vertex (shared by two 3-cells and two 5-cells) averages to 4
    coeffs = np.zeros((4, 3))
    coeffs[:, 0] = [3.0, 5.0, 3.0, 5.0]
    out = oswald_interpolate(quad2_mesh, dm, elements, coeffs)
    center = int(np.argmin(np.hypot(quad2_mesh.vertices[:, 0] - 0.5,
                                    quad2_mesh.vertices[:, 1] - 0.5)))
    assert out[center] == pytest.approx(4.0, abs=1e-13)


# ---------------------------------------------------------------------------
# CIP-norm surrogate


def test_cip_norm_zero_vector(quad2_mesh):
    dm = build_dof_map(quad2_mesh, 1)
    elements = build_elements(quad2_mesh, 1)
    val, per_cell = cip_norm(quad2_mesh, dm, elements, np.zeros(dm.n_dofs),
                             1.0, 1.0, BETA, 0.1)
    assert val == 0.0
    assert np.allclose(per_cell, 0.0)


def test_cip_norm_all_coefficients_zero(quad2_mesh, rng):
    dm = build_dof_map(quad2_mesh, 1)
    elements = build_elements(quad2_mesh, 1)
    v = lambda p: 0.1 + np.atleast_2d(p)[:, 0]  # affine: zero jumps, zero stab
    dofs = v(quad2_mesh.vertices)
    val, _ = cip_norm(quad2_mesh, dm, elements, dofs, 0.0, 0.0, ZERO, 0.1)
    assert val == pytest.approx(0.0, abs=1e-13)


def test_cip_norm_affine_closed_form(unit_square_mesh):
    # v = x + 2y on the single unit-square cell, eps=1, sigma=0, delta=0.1:
    # norm^2 = |grad v|^2 + h (beta . grad v)^2 + boundary xi^2 integrals
    dm = build_dof_map(unit_square_mesh, 1)
    elements = build_elements(unit_square_mesh, 1)
    dofs = unit_square_mesh.vertices @ np.array([1.0, 2.0])
    val, _ = cip_norm(unit_square_mesh, dm, elements, dofs, 1.0, 0.0, BETA, 0.1)
    c = 1.0 / (0.1 * SQ2)  # eps / (delta h_E)
    expected = (5.0 + SQ2 * 4.0
                + (c + 0.25) * (1.0 / 3.0 + 19.0 / 3.0)
                + (c + 0.5) * (4.0 / 3.0 + 13.0 / 3.0))
    assert val ** 2 == pytest.approx(expected, rel=1e-12)
