"""Local DoFs and computable projections for the space with interior order ko
and boundary order kb.

Every local function is also represented in the enlarged order-ko space
(vertex values, ko-1 Lobatto values per edge, the same moments); the
embedding matrix ``T`` maps true DoFs to enlarged DoFs. Polynomials of
degree ko are exactly representable there, which is what the stabilizations
and the consistency checks need.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .mesh import PolyMesh, element_diameter
from .poly import (
    MonomialBasis,
    centroid,
    dim_poly,
    edge_quadrature,
    lagrange_matrices,
    lobatto01,
    monomial_tables,
    polygon_quadrature,
    signed_area,
)


class ElementGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Orders:
    ko: int
    kb: int

    def __post_init__(self):
        if not (self.ko >= self.kb >= 1):
            raise ValueError(f"orders need ko >= kb >= 1, got ko={self.ko}, kb={self.kb}")

    @property
    def n_moments(self) -> int:
        return dim_poly(self.ko - 2)

    def n_local(self, ell: int) -> int:
        return ell * self.kb + self.n_moments

    def __str__(self) -> str:
        return f"({self.ko},{self.kb})"


class Element:
    """Geometry of one counterclockwise polygon."""

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        self.ell = len(self.vertices)
        self.area = signed_area(self.vertices)
        if self.area <= 0:
            raise ElementGeometryError("element has non-positive signed area")
        self.center = centroid(self.vertices)
        self.diameter = element_diameter(self.vertices)
        self.starts = self.vertices
        self.ends = np.roll(self.vertices, -1, axis=0)
        d = self.ends - self.starts
        self.lengths = np.linalg.norm(d, axis=1)
        self.tangents = d / self.lengths[:, None]
        self.normals = np.column_stack([self.tangents[:, 1], -self.tangents[:, 0]])
        self._quad = {}

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    def quad(self, degree: int):
        if degree not in self._quad:
            self._quad[degree] = polygon_quadrature(self.vertices, degree)
        return self._quad[degree]

    def edge_quad(self, degree: int):
        return edge_quadrature(self.starts, self.ends, degree)

    def basis(self, degree: int) -> MonomialBasis:
        return MonomialBasis(self.center, self.diameter, degree)


def edge_node_index(ell: int, k: int) -> np.ndarray:
    """Local boundary-DoF index of Lobatto node j on local edge i, shape (ell, k+1)."""
    idx = np.empty((ell, k + 1), dtype=int)
    idx[:, 0] = np.arange(ell)
    idx[:, k] = (np.arange(ell) + 1) % ell
    for j in range(1, k):
        idx[:, j] = ell + np.arange(ell) * (k - 1) + (j - 1)
    return idx


def trace_matrices(ell: int, k: int, n_dofs: int, ts) -> tuple[np.ndarray, np.ndarray]:
    """Trace values and d/dt at reference abscissae ``ts`` on every edge.

    Shapes (ell, len(ts), n_dofs); the boundary DoFs of an order-k space come
    first in the local numbering.
    """
    ts = tuple(float(t) for t in np.atleast_1d(ts))
    V, dV = lagrange_matrices(k, ts)
    idx = edge_node_index(ell, k)
    Phi = np.zeros((ell, len(ts), n_dofs))
    dPhi = np.zeros_like(Phi)
    rows = np.arange(ell)
    for j in range(k + 1):
        Phi[rows, :, idx[:, j]] += V[None, :, j]
        dPhi[rows, :, idx[:, j]] += dV[None, :, j]
    return Phi, dPhi


def boundary_nodes(el: Element, k: int) -> np.ndarray:
    """Physical points of the boundary DoFs of the order-k space (vertices first)."""
    t = lobatto01(k)[1:-1]
    inner = el.starts[:, None, :] + t[None, :, None] * (el.ends - el.starts)[:, None, :]
    return np.vstack([el.vertices, inner.reshape(-1, 2)])


@dataclass
class ElementProjections:
    element: Element
    orders: Orders
    D: np.ndarray  # true DoFs of the degree-ko monomials, (N_E, n_k)
    D_big: np.ndarray  # enlarged DoFs of the same, (N_big, n_k)
    T: np.ndarray  # true -> enlarged DoFs, (N_big, N_E)
    E: np.ndarray  # enlarged -> true DoF functionals, (N_E, N_big)
    pi_nabla_big: np.ndarray  # (n_k, N_big)
    B_big: np.ndarray  # right-hand side of the Pi-nabla system, (n_k, N_big)
    G: np.ndarray  # Pi-nabla system matrix (row 0 = boundary mean), (n_k, n_k)
    grad_gram: np.ndarray  # int grad m_a . grad m_b, (n_k, n_k)
    mass: np.ndarray  # int m_a m_b over P_ko, (n_k, n_k)
    pi0: np.ndarray  # L2 projection onto P_{ko-2}, (n_{ko-2}, N_E)
    pi0_grad: tuple[np.ndarray, np.ndarray]  # L2 projection of the gradient onto P_{ko-1}

    @cached_property
    def pi_nabla(self) -> np.ndarray:
        return self.pi_nabla_big @ self.T

    @property
    def n_local(self) -> int:
        return self.T.shape[1]

    @property
    def n_big(self) -> int:
        return self.T.shape[0]

    def min_singular_value_D(self) -> float:
        return float(np.linalg.svd(self.D_big, compute_uv=False).min())


def build_projections(el: Element, orders: Orders, quad_degree: int | None = None) -> ElementProjections:
    ko, kb = orders.ko, orders.kb
    ell, h, area = el.ell, el.diameter, el.area
    nm = dim_poly(ko - 2)
    n1 = dim_poly(ko - 1)
    nk = dim_poly(ko)
    N_big = ell * ko + nm
    N_E = ell * kb + nm
    basis = el.basis(ko)

    q = el.quad(quad_degree if quad_degree is not None else 2 * ko + 2)
    mq = basis.eval(q.points)
    mass = (mq * q.weights[:, None]).T @ mq
    gx, gy = basis.grad(q.points)
    grad_gram = (gx * q.weights[:, None]).T @ gx + (gy * q.weights[:, None]).T @ gy

    eq = el.edge_quad(2 * ko)
    pts = eq.points.reshape(-1, 2)
    w = eq.weights  # (ell, nq)
    m_e = basis.eval(pts).reshape(ell, -1, nk)
    gx_e, gy_e = (g.reshape(ell, -1, nk) for g in basis.grad(pts))
    Phi, _ = trace_matrices(ell, ko, N_big, eq.params)

    # grad m_a . grad v = -lap(m_a) v + d_n(m_a) v on the boundary
    dn = gx_e * el.normals[:, 0, None, None] + gy_e * el.normals[:, 1, None, None]
    B = np.einsum("iq,iqa,iqn->an", w, dn, Phi)
    lap = monomial_tables(ko)[2] / h**2
    B[:, ell * ko :] -= area * lap
    B[0] = np.einsum("iq,iqn->n", w, Phi)

    G = grad_gram.copy()
    G[0] = np.einsum("iq,iqa->a", w, m_e)
    try:
        lu = sla.lu_factor(G, check_finite=True)
        pi_big = sla.lu_solve(lu, B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ElementGeometryError(f"singular projection system: {exc}") from None
    if not np.all(np.isfinite(pi_big)) or np.linalg.cond(G) > 1e14:
        raise ElementGeometryError("singular projection system (degenerate polygon)")

    # enlarged and true DoFs of the monomials
    D_big = np.zeros((N_big, nk))
    D_big[: ell * ko] = basis.eval(boundary_nodes(el, ko))
    D_big[ell * ko :] = mass[:nm] / area
    D = np.zeros((N_E, nk))
    D[: ell * kb] = basis.eval(boundary_nodes(el, kb))
    D[ell * kb :] = mass[:nm] / area

    T = np.zeros((N_big, N_E))
    T[:ell, :ell] = np.eye(ell)
    if ko > 1:
        Pt, _ = trace_matrices(ell, kb, N_E, lobatto01(ko)[1:-1])
        T[ell : ell * ko] = Pt.reshape(ell * (ko - 1), N_E)
    T[ell * ko :, ell * kb :] = np.eye(nm)
    E = np.zeros((N_E, N_big))
    E[:ell, :ell] = np.eye(ell)
    if kb > 1:
        Pe, _ = trace_matrices(ell, ko, N_big, lobatto01(kb)[1:-1])
        E[ell : ell * kb] = Pe.reshape(ell * (kb - 1), N_big)
    E[ell * kb :, ell * ko :] = np.eye(nm)

    pi0 = np.zeros((nm, N_E))
    if nm:
        pi0[:, ell * kb :] = area * np.linalg.inv(mass[:nm, :nm])

    dx, dy = monomial_tables(ko - 1)[:2]
    M1 = mass[:n1, :n1]
    grads = []
    for c, dtab in ((0, dx), (1, dy)):
        rhs = np.einsum("iq,iqb,iqn->bn", w, m_e[:, :, :n1] * el.normals[:, c, None, None], Phi)
        if nm:
            rhs[:, ell * ko :] -= area * dtab / h
        grads.append(np.linalg.solve(M1, rhs) @ T)

    return ElementProjections(
        element=el,
        orders=orders,
        D=D,
        D_big=D_big,
        T=T,
        E=E,
        pi_nabla_big=pi_big,
        B_big=B,
        G=G,
        grad_gram=grad_gram,
        mass=mass,
        pi0=pi0,
        pi0_grad=(grads[0], grads[1]),
    )


# --- interpolation ----------------------------------------------------------


def dof_interpolate(el: Element, orders: Orders, v, quad_degree: int | None = None) -> np.ndarray:
    """Local DoF vector of a field ``v(points) -> values`` (nodal + moments)."""
    nm = orders.n_moments
    vals = np.asarray(v(boundary_nodes(el, orders.kb)), dtype=float)
    if not nm:
        return vals
    q = el.quad(quad_degree if quad_degree is not None else 2 * orders.ko + 2)
    m = el.basis(orders.ko - 2).eval(q.points)
    moments = (np.asarray(v(q.points), dtype=float) * q.weights) @ m / el.area
    return np.concatenate([vals, moments])


def poly_dofs_big(proj: ElementProjections, coeffs) -> np.ndarray:
    """Enlarged DoF vector of the polynomial with the given monomial coefficients."""
    return proj.D_big @ np.asarray(coeffs, dtype=float)


# --- global layout ------------------------------------------------------------


@dataclass
class DofLayout:
    mesh: PolyMesh
    orders: Orders
    local_to_global: list[np.ndarray]
    n_dofs: int
    n_boundary_type: int  # vertex + edge-node DoFs, numbered first
    boundary_dofs: np.ndarray  # DoFs on the domain boundary
    points: np.ndarray  # coordinates of the vertex/edge-node DoFs

    def n_local(self, k: int) -> int:
        return len(self.local_to_global[k])

    def moment_slice(self, k: int) -> slice:
        nm = self.orders.n_moments
        start = self.n_boundary_type + k * nm
        return slice(start, start + nm)


def build_dof_layout(mesh: PolyMesh, orders: Orders) -> DofLayout:
    kb, nm = orders.kb, orders.n_moments
    nv = mesh.n_vertices
    ne = mesh.n_edges
    eidx = mesh.edge_index
    n_bt = nv + ne * (kb - 1)
    l2g = []
    for k, el in enumerate(mesh.elements):
        ell = len(el)
        loc = np.empty(ell * kb + nm, dtype=int)
        loc[:ell] = el
        for i, (a, b) in enumerate(zip(el, np.roll(el, -1))):
            base = nv + eidx[(min(a, b), max(a, b))] * (kb - 1)
            ids = base + np.arange(kb - 1)
            loc[ell + i * (kb - 1) : ell + (i + 1) * (kb - 1)] = ids if a < b else ids[::-1]
        loc[ell * kb :] = n_bt + k * nm + np.arange(nm)
        l2g.append(loc)

    t = lobatto01(kb)[1:-1]
    pts = np.zeros((n_bt, 2))
    pts[:nv] = mesh.vertices
    bnd = list(np.flatnonzero(mesh.boundary))
    for i, e in enumerate(mesh.edges):
        p, q = mesh.vertices[e.a], mesh.vertices[e.b]
        ids = nv + i * (kb - 1) + np.arange(kb - 1)
        pts[ids] = p + t[:, None] * (q - p)
        if e.is_boundary:
            bnd.extend(ids.tolist())
    return DofLayout(
        mesh=mesh,
        orders=orders,
        local_to_global=l2g,
        n_dofs=n_bt + mesh.n_elements * nm,
        n_boundary_type=n_bt,
        boundary_dofs=np.array(sorted(bnd), dtype=int),
        points=pts,
    )


def interpolate_global(layout: DofLayout, v, quad_degree: int | None = None) -> np.ndarray:
    """Global DoF vector of a field: point values at nodes, moments per element."""
    u = np.zeros(layout.n_dofs)
    u[: layout.n_boundary_type] = v(layout.points)
    if layout.orders.n_moments:
        for k in range(layout.mesh.n_elements):
            el = Element(layout.mesh.polygon(k))
            loc = dof_interpolate(el, layout.orders, v, quad_degree)
            u[layout.moment_slice(k)] = loc[el.ell * layout.orders.kb :]
    return u
