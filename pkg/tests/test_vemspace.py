import numpy as np
import pytest

from conftest import random_convex_polygon, random_star_polygon, unit_square
from vempoly.mesh import generate_quad_mesh, generate_voronoi_mesh
from vempoly.poly import dim_poly, monomial_tables
from vempoly.vemspace import (
    Element,
    ElementGeometryError,
    Orders,
    build_dof_layout,
    boundary_nodes,
    build_projections,
    dof_interpolate,
    interpolate_global,
)

ORDER_PAIRS = [(ko, kb) for ko in range(1, 5) for kb in range(1, ko + 1)]


def tensor_gauss(a, s, n=40):
    x, w = np.polynomial.legendre.leggauss(n)
    t = (x + 1) / 2
    P = np.stack(np.meshgrid(a[0] + s * t, a[1] + s * t, indexing="ij"), -1).reshape(-1, 2)
    return P, np.outer(w, w).ravel() * s * s / 4


def test_orders_validation():
    Orders(3, 1)
    with pytest.raises(ValueError):
        Orders(1, 2)
    with pytest.raises(ValueError):
        Orders(0, 0)


@pytest.mark.parametrize("k,expected", [((2, 1), 5), ((4, 2), 14), ((1, 1), 4), ((3, 3), 15)])
def test_local_dof_count_square(k, expected):
    proj = build_projections(Element(unit_square()), Orders(*k))
    assert proj.n_local == expected == Orders(*k).n_local(4)


def test_k11_is_vertex_values_only(rng):
    poly = random_convex_polygon(rng, 7)
    assert build_projections(Element(poly), Orders(1, 1)).n_local == 7


@pytest.mark.parametrize("k", [(1, 1), (2, 1), (3, 2), (4, 3)])
def test_global_dof_count(k):
    mesh = generate_voronoi_mesh(12, lloyd_iters=10)
    o = Orders(*k)
    lay = build_dof_layout(mesh, o)
    assert lay.n_dofs == mesh.n_vertices + mesh.n_edges * (o.kb - 1) + mesh.n_elements * dim_poly(o.ko - 2)
    assert len(set(np.concatenate(lay.local_to_global).tolist())) == lay.n_dofs


def test_shared_nodes_have_same_coordinates():
    mesh = generate_voronoi_mesh(15, lloyd_iters=10)
    o = Orders(3, 3)
    lay = build_dof_layout(mesh, o)
    for k in range(mesh.n_elements):
        el = Element(mesh.polygon(k))
        pts = boundary_nodes(el, o.kb)
        ids = lay.local_to_global[k][: len(pts)]
        np.testing.assert_allclose(lay.points[ids], pts, atol=1e-13)


def test_moments_never_shared():
    mesh = generate_quad_mesh(3)
    lay = build_dof_layout(mesh, Orders(4, 2))
    interior = [set(loc[loc >= lay.n_boundary_type].tolist()) for loc in lay.local_to_global]
    for i in range(len(interior)):
        for j in range(i + 1, len(interior)):
            assert not interior[i] & interior[j]
    assert all(len(s) == 6 for s in interior)


def test_boundary_dofs_lie_on_boundary():
    mesh = generate_voronoi_mesh(20, lloyd_iters=10)
    lay = build_dof_layout(mesh, Orders(3, 3))
    p = lay.points[lay.boundary_dofs]
    d = np.minimum(np.minimum(p[:, 0], 1 - p[:, 0]), np.minimum(p[:, 1], 1 - p[:, 1]))
    assert np.abs(d).max() < 1e-12
    inner = np.setdiff1d(np.arange(lay.n_boundary_type), lay.boundary_dofs)
    q = lay.points[inner]
    assert np.minimum(np.minimum(q[:, 0], 1 - q[:, 0]), np.minimum(q[:, 1], 1 - q[:, 1])).min() > 1e-9


@pytest.mark.parametrize("k", ORDER_PAIRS)
def test_polynomial_reproduction_random_polygons(k, rng):
    o = Orders(*k)
    nm = o.n_moments
    for trial in range(25):
        n = int(rng.integers(3, 11))
        poly = random_convex_polygon(rng, n) if trial % 2 else random_star_polygon(rng, max(n, 5))
        proj = build_projections(Element(poly), o)
        nk, nb = proj.D.shape[1], dim_poly(o.kb)
        # all of P_ko in the enlarged representation, P_kb on the true DoFs
        np.testing.assert_allclose(proj.pi_nabla_big @ proj.D_big, np.eye(nk), atol=1e-10)
        np.testing.assert_allclose(proj.pi_nabla @ proj.D[:, :nb], np.eye(nk)[:, :nb], atol=1e-10)
        if nm:
            np.testing.assert_allclose(proj.pi0 @ proj.D[:, :nm], np.eye(nm), atol=1e-10)
        dx, dy = monomial_tables(o.ko)[:2]
        h = proj.element.diameter
        for g, d in zip(proj.pi0_grad, (dx, dy)):
            np.testing.assert_allclose(g @ proj.D[:, :nb], d[:nb].T / h, atol=1e-9 / h)


def test_constant_projects_to_constant(rng):
    poly = random_convex_polygon(rng, 6)
    proj = build_projections(Element(poly), Orders(3, 2))
    one = proj.D[:, 0]
    coeffs = proj.pi_nabla @ one
    assert abs(coeffs[0] - 1) < 1e-12 and np.abs(coeffs[1:]).max() < 1e-12


def test_orthogonality_identity_square(rng):
    proj = build_projections(Element(unit_square()), Orders(2, 2))
    Bt = proj.B_big.copy()
    Bt[0] = 0.0
    for _ in range(5):
        v = proj.T @ rng.standard_normal(proj.n_local)
        # int grad q . grad(v - Pi v) through the DoF identity
        res = Bt @ v - proj.grad_gram @ (proj.pi_nabla_big @ v)
        assert np.abs(res).max() < 1e-10


def test_equal_orders_use_identity_embedding(rng):
    for k in (1, 2, 3):
        proj = build_projections(Element(random_convex_polygon(rng, 5)), Orders(k, k))
        np.testing.assert_array_equal(proj.T, np.eye(proj.n_local))
        np.testing.assert_array_equal(proj.E, np.eye(proj.n_local))


def test_k1_square_matches_classical_gradient():
    # classical lowest order: gradient of the projection = boundary average of v n
    proj = build_projections(Element(unit_square()), Orders(1, 1))
    g = proj.pi_nabla[1:] / proj.element.diameter
    expected = np.array([[-0.5, 0.5, 0.5, -0.5], [-0.5, -0.5, 0.5, 0.5]])
    np.testing.assert_allclose(g, expected, atol=1e-13)


def test_degenerate_polygon_rejected():
    with pytest.raises(ElementGeometryError):
        Element([[0, 0], [1, 0], [2, 0]])


def test_interpolate_global_polynomial_exact():
    mesh = generate_voronoi_mesh(10, lloyd_iters=10)
    o = Orders(3, 2)
    lay = build_dof_layout(mesh, o)

    def q(p):
        return 1 + p[..., 0] - 2 * p[..., 1] ** 2 + p[..., 0] * p[..., 1]

    u = interpolate_global(lay, q)
    for k in range(mesh.n_elements):
        proj = build_projections(Element(mesh.polygon(k)), o)
        vals = proj.element.basis(o.ko).eval(proj.element.vertices) @ (proj.pi_nabla @ u[lay.local_to_global[k]])
        np.testing.assert_allclose(vals, q(proj.element.vertices), atol=1e-10)


def test_dof_interpolate_constant(rng):
    el = Element(random_convex_polygon(rng, 6))
    o = Orders(3, 2)
    d = dof_interpolate(el, o, lambda p: np.full(len(p), 3.5))
    nb = el.ell * o.kb
    np.testing.assert_allclose(d[:nb], 3.5)
    assert abs(d[nb] - 3.5) < 1e-12
    assert np.abs(d[nb + 1 :]).max() < 1e-12


@pytest.mark.parametrize("ko", [2, 3, 4])
def test_dof_interpolate_moments_vs_tensor_gauss(ko):
    s = 2.0**-4
    a = np.array([0.3125, 0.5])
    el = Element(a + s * unit_square())
    o = Orders(ko, 1)

    def v(p):
        return np.sin(2 * np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1])

    d = dof_interpolate(el, o, v)[4:]
    P, W = tensor_gauss(a, s)
    ref = (v(P) * W) @ el.basis(ko - 2).eval(P) / el.area
    np.testing.assert_allclose(d, ref, atol=1e-9)
