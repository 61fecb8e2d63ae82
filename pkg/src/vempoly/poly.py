"""Scaled monomials, polygon/edge quadrature and Gauss-Lobatto edge nodes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def dim_poly(n: int) -> int:
    """Dimension of P_n in two variables (0 for n < 0)."""
    return (n + 1) * (n + 2) // 2 if n >= 0 else 0


@lru_cache(maxsize=None)
def exponents(n: int) -> np.ndarray:
    """Graded-lex exponent table, shape (dim_poly(n), 2)."""
    out = [(d - i, i) for d in range(n + 1) for i in range(d + 1)]
    return np.array(out, dtype=int).reshape(-1, 2)


def _index(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@dataclass(frozen=True)
class MonomialBasis:
    """m_a(x) = ((x - center) / diameter)**a for |a| <= degree."""

    center: np.ndarray
    diameter: float
    degree: int

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    def _scaled(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts - self.center) / self.diameter

    def eval(self, pts) -> np.ndarray:
        """Values at points, shape (npts, size)."""
        s = self._scaled(pts)
        e = exponents(self.degree)
        return s[:, :1] ** e[:, 0] * s[:, 1:] ** e[:, 1]

    def grad(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Exact x/y derivatives at points, each of shape (npts, size)."""
        vals = MonomialBasis(self.center, self.diameter, max(self.degree - 1, 0)).eval(pts)
        dx, dy = monomial_tables(self.degree)[:2]
        return vals @ dx.T / self.diameter, vals @ dy.T / self.diameter


@lru_cache(maxsize=None)
def monomial_tables(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient maps of d/dx, d/dy and the Laplacian for the degree-n basis.

    Returned matrices act on unit-diameter monomials: row a of ``dx`` holds
    the expansion of d/dX m_a in the degree n-1 basis (and similarly for
    ``lap`` in the degree n-2 basis). Divide by h_E (resp. h_E**2) for
    physical derivatives.
    """
    e = exponents(n)
    dx = np.zeros((len(e), dim_poly(n - 1)))
    dy = np.zeros_like(dx)
    lap = np.zeros((len(e), dim_poly(n - 2)))
    for r, (a, b) in enumerate(e):
        if a >= 1:
            dx[r, _index(a - 1, b)] = a
        if b >= 1:
            dy[r, _index(a, b - 1)] = b
        if a >= 2:
            lap[r, _index(a - 2, b)] += a * (a - 1)
        if b >= 2:
            lap[r, _index(a, b - 2)] += b * (b - 1)
    return dx, dy, lap


# --- 1D rules -------------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_for_degree(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0, 1] exact for polynomials of degree <= d."""
    return gauss_legendre01(max(1, (d + 2) // 2))


@lru_cache(maxsize=None)
def lobatto01(k: int) -> np.ndarray:
    """The k+1 Gauss-Lobatto nodes on [0, 1] (endpoints included)."""
    if k < 1:
        raise ValueError("need k >= 1")
    inner = np.polynomial.legendre.Legendre.basis(k).deriv().roots() if k > 1 else []
    t = np.concatenate([[-1.0], np.sort(np.real(inner)), [1.0]])
    return 0.5 * (t + 1.0)


def edge_dof_nodes(p0, p1, kb: int) -> np.ndarray:
    """Interior D_V2 nodes of the segment p0 -> p1 for boundary degree kb."""
    t = lobatto01(kb)[1:-1]
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    return p0 + t[:, None] * (p1 - p0)


@lru_cache(maxsize=None)
def lagrange_matrices(k: int, ts: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Values and t-derivatives of the Lobatto-k Lagrange basis at ``ts``.

    Rows follow ``ts``; columns follow lobatto01(k) node order.
    """
    return lagrange_eval(k, np.asarray(ts, dtype=float))


def lagrange_eval(k: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nodes = lobatto01(k)
    t = np.asarray(t, dtype=float)
    vals = np.ones((len(t), k + 1))
    ders = np.zeros((len(t), k + 1))
    for j, xj in enumerate(nodes):
        others = np.delete(nodes, j)
        denom = np.prod(xj - others)
        terms = t[:, None] - others[None, :]
        vals[:, j] = np.prod(terms, axis=1) / denom
        acc = np.zeros(len(t))
        for m in range(len(others)):
            acc += np.prod(np.delete(terms, m, axis=1), axis=1)
        ders[:, j] = acc / denom
    return vals, ders


# --- triangle and polygon rules ----------------------------------------


@lru_cache(maxsize=None)
def triangle_rule(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the reference triangle, exact to degree d.

    Returns barycentric-style coordinates (xi, eta) with weights summing to 1/2.
    """
    n = max(1, (d + 3) // 2)
    g, w = gauss_legendre01(n)
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u * (1.0 - v)
    eta = u * v
    return np.column_stack([xi.ravel(), eta.ravel()]), (wu * wv * u).ravel()


@dataclass
class PolygonQuadrature:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def centroid(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    a = 0.5 * cross.sum()
    return np.array([((p[:, 0] + q[:, 0]) * cross).sum(), ((p[:, 1] + q[:, 1]) * cross).sum()]) / (6.0 * a)


class QuadratureError(ValueError):
    pass


def _ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    idx = list(range(len(poly)))
    tris = []

    def cross(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    guard = 0
    while len(idx) > 3 and guard < 10 * len(poly) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = poly[i0], poly[i1], poly[i2]
            cr = cross(a, b, c)
            scale = max(np.ptp(poly[:, 0]), np.ptp(poly[:, 1])) ** 2
            if cr <= 1e-14 * scale:
                if abs(cr) <= 1e-14 * scale:
                    # collinear vertex: dropping it removes a zero-area sliver
                    idx.pop(k)
                    break
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = poly[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
        else:
            raise QuadratureError("ear clipping failed: polygon is not simple")
    if len(idx) == 3:
        tris.append(tuple(idx))
    return tris


def fan_triangles(poly) -> np.ndarray:
    """Triangles (N, 3, 2) covering the polygon.

    Centroid fan when the polygon is star-shaped with respect to its
    centroid, otherwise an ear-clipping triangulation.
    """
    p = np.asarray(poly, dtype=float)
    c = centroid(p)
    q = np.roll(p, -1, axis=0)
    areas = 0.5 * ((p[:, 0] - c[0]) * (q[:, 1] - c[1]) - (q[:, 0] - c[0]) * (p[:, 1] - c[1]))
    scale = max(np.ptp(p[:, 0]), np.ptp(p[:, 1])) ** 2
    if np.all(areas > 1e-13 * scale):
        return np.stack([np.broadcast_to(c, p.shape), p, q], axis=1)
    tris = _ear_clip(p)
    if not tris:
        raise QuadratureError("degenerate polygon")
    return np.array([[p[i], p[j], p[k]] for i, j, k in tris])


def polygon_quadrature(poly, degree: int) -> PolygonQuadrature:
    tris = fan_triangles(poly)
    ref, rw = triangle_rule(degree)
    a = tris[:, 0]
    e1 = tris[:, 1] - a
    e2 = tris[:, 2] - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise QuadratureError("triangle with non-positive area in polygon quadrature")
    pts = a[:, None, :] + ref[None, :, :1] * e1[:, None, :] + ref[None, :, 1:] * e2[:, None, :]
    w = det[:, None] * rw[None, :]
    return PolygonQuadrature(pts.reshape(-1, 2), w.ravel(), degree)


@dataclass
class EdgeQuadrature:
    points: np.ndarray  # (n_edges, nq, 2)
    weights: np.ndarray  # (n_edges, nq), physical
    params: np.ndarray  # (nq,) reference abscissae in [0, 1]
    degree: int


def edge_quadrature(starts, ends, degree: int) -> EdgeQuadrature:
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    t, w = gauss_for_degree(degree)
    lengths = np.linalg.norm(ends - starts, axis=1)
    pts = starts[:, None, :] + t[None, :, None] * (ends - starts)[:, None, :]
    return EdgeQuadrature(pts, lengths[:, None] * w[None, :], t, degree)


def monomial_integral_green(poly, a: int, b: int, center=(0.0, 0.0), scale: float = 1.0) -> float:
    """Exact integral of ((x-c)/s)^a ((y-c)/s)^b over a polygon.

    Uses the divergence theorem with F = (X^{a+1} Y^b / (a+1), 0) and an
    exact Gauss rule on each edge; independent of the triangle rules.
    """
    p = (np.asarray(poly, dtype=float) - np.asarray(center)) / scale
    q = np.roll(p, -1, axis=0)
    t, w = gauss_for_degree(a + b + 1)
    total = 0.0
    for p0, p1 in zip(p, q):
        pts = p0 + t[:, None] * (p1 - p0)
        ny_len = p1[1] - p0[1]  # n_x * |e| for a ccw polygon
        total += ny_len * np.sum(w * pts[:, 0] ** (a + 1) * pts[:, 1] ** b) / (a + 1)
    return total * scale**2
