"""Computable error quantities, interpolation probes and rate fitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import PolyMesh, compute_metrics, element_diameter
from .poly import gauss_for_degree, lagrange_matrices, lobatto01
from .vemspace import Element, Orders, build_dof_layout, build_projections, interpolate_global

CSV_HEADER = "family,ko,kb,stab,h,h_bnd,H_ratio,ell_max,ndof,err_bulk,err_trace"


@dataclass
class ErrorValue:
    value: float
    numerator: float
    denominator: float
    contributions: np.ndarray  # per element (bulk) or per edge (trace), squared


def _ratio(num: float, den: float) -> float:
    if den <= 0:
        return 0.0 if num <= 0 else np.inf
    return float(np.sqrt(num / den))


def err_bulk(mesh: PolyMesh, orders: Orders, u_h: np.ndarray, grad_ex, *, layout=None,
             pi0_grads=None, quad_degree: int | None = None) -> ErrorValue:
    """Relative L2 error of the projected discrete gradient against the exact one."""
    layout = layout or build_dof_layout(mesh, orders)
    deg = quad_degree if quad_degree is not None else 2 * orders.ko + 4
    contrib = np.zeros(mesh.n_elements)
    den = 0.0
    for k in range(mesh.n_elements):
        el = Element(mesh.polygon(k))
        if pi0_grads is None:
            px, py = build_projections(el, orders).pi0_grad
        else:
            px, py = pi0_grads[k]
        uk = u_h[layout.local_to_global[k]]
        q = el.quad(deg)
        m = el.basis(orders.ko - 1).eval(q.points)
        gx, gy = grad_ex(q.points)
        ex, ey = gx - m @ (px @ uk), gy - m @ (py @ uk)
        contrib[k] = q.weights @ (ex**2 + ey**2)
        den += q.weights @ (gx**2 + gy**2)
    num = float(contrib.sum())
    return ErrorValue(_ratio(num, den), num, float(den), contrib)


def edge_weights(mesh: PolyMesh) -> np.ndarray:
    """H_e: mean diameter of the elements sharing each edge."""
    diam = np.array([element_diameter(mesh.polygon(k)) for k in range(mesh.n_elements)])
    return np.array([diam[list(e.elements)].mean() for e in mesh.edges])


def _edge_trace_dofs(layout) -> np.ndarray:
    """Global DoFs of the kb+1 Lobatto nodes along each edge, oriented a -> b."""
    mesh, kb = layout.mesh, layout.orders.kb
    nv = mesh.n_vertices
    out = np.empty((mesh.n_edges, kb + 1), dtype=int)
    for i, e in enumerate(mesh.edges):
        out[i, 0], out[i, kb] = e.a, e.b
        out[i, 1:kb] = nv + i * (kb - 1) + np.arange(kb - 1)
    return out


def err_trace(mesh: PolyMesh, orders: Orders, u_h: np.ndarray, grad_ex, *, layout=None,
              quad_degree: int | None = None) -> ErrorValue:
    """Relative H_e-weighted error of tangential derivatives on the skeleton."""
    layout = layout or build_dof_layout(mesh, orders)
    deg = quad_degree if quad_degree is not None else max(2 * orders.kb + 2, 2 * orders.ko + 4)
    t, w = gauss_for_degree(deg)
    _, dV = lagrange_matrices(orders.kb, tuple(t))
    ab = np.array([(e.a, e.b) for e in mesh.edges])
    p0, p1 = mesh.vertices[ab[:, 0]], mesh.vertices[ab[:, 1]]
    d = p1 - p0
    L = np.linalg.norm(d, axis=1)
    tang = d / L[:, None]
    pts = p0[:, None, :] + t[None, :, None] * d[:, None, :]
    gx, gy = grad_ex(pts.reshape(-1, 2))
    ds_ex = (gx.reshape(len(L), -1) * tang[:, :1] + gy.reshape(len(L), -1) * tang[:, 1:])
    ds_h = (u_h[_edge_trace_dofs(layout)] @ dV.T) / L[:, None]
    H = edge_weights(mesh)
    contrib = H * L * (((ds_ex - ds_h) ** 2) @ w)
    den = float(np.sum(H * L * ((ds_ex**2) @ w)))
    num = float(contrib.sum())
    return ErrorValue(_ratio(num, den), num, den, contrib)


def interpolation_probe(mesh: PolyMesh, orders: Orders, v, grad_v, n_check: int = 8):
    """(err_bulk of the DoF interpolant, max skeleton |v - v_b|).

    v_b is the degree-kb Lobatto interpolant of v on each edge.
    """
    layout = build_dof_layout(mesh, orders)
    ui = interpolate_global(layout, v)
    bulk = err_bulk(mesh, orders, ui, grad_v, layout=layout).value
    kb = orders.kb
    ts = tuple(np.linspace(0.0, 1.0, n_check * (kb + 1) + 1)[1:-1])
    Vq, _ = lagrange_matrices(kb, ts)
    nodes = lobatto01(kb)
    ab = np.array([(e.a, e.b) for e in mesh.edges])
    p0, p1 = mesh.vertices[ab[:, 0]], mesh.vertices[ab[:, 1]]
    d = p1 - p0
    node_pts = p0[:, None, :] + nodes[None, :, None] * d[:, None, :]
    check = p0[:, None, :] + np.array(ts)[None, :, None] * d[:, None, :]
    vn = np.asarray(v(node_pts.reshape(-1, 2))).reshape(len(ab), -1)
    vc = np.asarray(v(check.reshape(-1, 2))).reshape(len(ab), -1)
    linf = float(np.abs(vc - vn @ Vq.T).max())
    return bulk, linf


@dataclass
class RateFit:
    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    residual: float  # RMS residual in log space


def fit_rate(x, y, min_points: int = 3) -> RateFit:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("rate fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((A @ [slope, icpt] - ly) ** 2)))
    return RateFit(x, y, float(slope), float(icpt), res)


@dataclass
class ErrorReport:
    family: str
    ko: int
    kb: int
    stab: str
    h: float
    h_bnd: float
    H_ratio: float
    ell_max: int
    ndof: int
    err_bulk: float
    err_trace: float
    extra: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        return (f"{self.family},{self.ko},{self.kb},{self.stab},{self.h:.6e},{self.h_bnd:.6e},"
                f"{self.H_ratio:.6e},{self.ell_max},{self.ndof},{self.err_bulk:.6e},{self.err_trace:.6e}")


def report_solution(sol, exact, family: str = "") -> ErrorReport:
    """Evaluate both error quantities for a ``solve.Solution``."""
    mesh, orders = sol.mesh, sol.orders
    eb = err_bulk(mesh, orders, sol.u, exact.grad, layout=sol.layout,
                  pi0_grads=[ed.pi0_grad for ed in sol.elements])
    et = err_trace(mesh, orders, sol.u, exact.grad, layout=sol.layout)
    met = compute_metrics(mesh)
    return ErrorReport(family, orders.ko, orders.kb, sol.stab.value, met.h, met.h_bnd, met.H,
                       int(met.ell_E.max()), sol.ndof, eb.value, et.value,
                       {"bulk_elements": eb.contributions, "trace_edges": et.contributions})
