"""H^{1/2} seminorms of continuous piecewise polynomials on 1D grids.

The double integral of (v(x) - v(y))^2 / (x - y)^2 is split by element pairs:

* same element: the integrand is the squared divided difference, a polynomial,
  so a tensor Gauss rule with interlacing node sets is exact;
* neighbours: the corner square at the shared node is mapped to two collapsed
  triangles, which cancels the 1/(x-y)^2 blow-up; the rest is a far-field
  block;
* far-field blocks are bisected until size <= dist, then tensor Gauss.

All parts are written as a rule sum_q w_q (v(x_q) - v(y_q))^2 so the same
points also assemble the seminorm matrix of a nodal basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .poly import gauss_legendre01, lagrange_eval, lobatto01


class H12ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    breakpoints: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("a grid needs at least two breakpoints")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)

    @classmethod
    def from_lengths(cls, lengths, start: float = 0.0) -> "Grid1D":
        return cls(start + np.concatenate([[0.0], np.cumsum(lengths)]))

    @classmethod
    def uniform(cls, n: int, a: float = 0.0, b: float = 1.0) -> "Grid1D":
        return cls(np.linspace(a, b, n + 1))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def ratio(self) -> float:
        L = self.lengths
        return float(L.max() / L.min())


@dataclass
class PiecewisePoly1D:
    """Continuous piecewise polynomial stored by its values at local Lobatto nodes."""

    grid: Grid1D
    values: np.ndarray  # (n_elements, k + 1)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.grid.n_elements or self.values.shape[1] < 2:
            raise ValueError("values must have shape (n_elements, k + 1) with k >= 1")
        jump = np.abs(self.values[:-1, -1] - self.values[1:, 0])
        scale = max(1.0, float(np.abs(self.values).max()))
        if jump.size and jump.max() > 1e-12 * scale:
            raise ValueError(f"function is discontinuous at a breakpoint (jump {jump.max():.2e})")

    @property
    def degree(self) -> int:
        return self.values.shape[1] - 1

    @classmethod
    def from_nodal(cls, grid: Grid1D, nodal) -> "PiecewisePoly1D":
        """Piecewise linear function with the given breakpoint values."""
        nodal = np.asarray(nodal, dtype=float)
        return cls(grid, np.column_stack([nodal[:-1], nodal[1:]]))

    @classmethod
    def from_global(cls, grid: Grid1D, k: int, coeffs) -> "PiecewisePoly1D":
        """From coefficients in the global nodal basis (see ``global_dofs``)."""
        return cls(grid, np.asarray(coeffs, dtype=float)[global_dofs(grid.n_elements, k)])

    @classmethod
    def interpolate(cls, grid: Grid1D, k: int, f) -> "PiecewisePoly1D":
        t = lobatto01(k)
        a = grid.breakpoints[:-1, None]
        x = a + t[None, :] * grid.lengths[:, None]
        vals = np.asarray(f(x), dtype=float)
        vals[1:, 0] = vals[:-1, -1]
        return cls(grid, vals)

    def eval_local(self, elem: np.ndarray, s: np.ndarray) -> np.ndarray:
        V, _ = lagrange_eval(self.degree, s)
        return np.einsum("qj,qj->q", V, self.values[elem])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = self.grid.breakpoints
        elem = np.clip(np.searchsorted(b, x, side="right") - 1, 0, self.grid.n_elements - 1)
        s = (x - b[elem]) / self.grid.lengths[elem]
        return self.eval_local(elem, s.ravel()).reshape(x.shape)

    def monomial_coeffs(self) -> np.ndarray:
        """Per-element coefficients in the local variable s in [0, 1], lowest first."""
        k = self.degree
        t = lobatto01(k)
        V = np.vander(t, k + 1, increasing=True)
        return np.linalg.solve(V, self.values.T).T

    def linf_per_element(self) -> np.ndarray:
        """Exact max |v| on each element (endpoints and critical points)."""
        c = self.monomial_coeffs()
        out = np.abs(self.values).max(axis=1)
        if self.degree == 1:
            return out
        P = np.polynomial.polynomial
        for i, ci in enumerate(c):
            r = P.polyroots(P.polyder(ci)) if np.any(ci[1:] != 0) else np.zeros(0)
            r = np.real(r[np.abs(np.imag(r)) < 1e-12])
            r = r[(r > 0) & (r < 1)]
            if r.size:
                out[i] = max(out[i], np.abs(P.polyval(r, ci)).max())
        return out


def global_dofs(n_elements: int, k: int) -> np.ndarray:
    """Map (element, local Lobatto node) -> global nodal index; breakpoints shared."""
    return np.arange(n_elements)[:, None] * k + np.arange(k + 1)[None, :]


# --- the kernel rule ----------------------------------------------------------


@dataclass
class KernelRule:
    ex: np.ndarray
    sx: np.ndarray
    ey: np.ndarray
    sy: np.ndarray
    w: np.ndarray

    def apply(self, v: PiecewisePoly1D) -> float:
        d = v.eval_local(self.ex, self.sx) - v.eval_local(self.ey, self.sy)
        return float(np.dot(self.w, d * d))


class _Builder:
    def __init__(self, grid: Grid1D):
        self.a = grid.breakpoints[:-1]
        self.L = grid.lengths
        self.parts = []

    def add(self, ex, sx, ey, sy, w):
        n = len(w)
        self.parts.append((np.broadcast_to(ex, n), sx, np.broadcast_to(ey, n), sy, w))

    def far(self, i, xa, xb, j, ya, yb, n, eta, factor):
        """Block [xa,xb] of element i against [ya,yb] of element j (x left of y), global coords."""
        stack = [(xa, xb, ya, yb)]
        g, gw = gauss_legendre01(n)
        blocks = []
        while stack:
            x0, x1, y0, y1 = stack.pop()
            dist = y0 - x1
            lx, ly = x1 - x0, y1 - y0
            if max(lx, ly) <= eta * dist:
                blocks.append((x0, lx, y0, ly))
            elif lx >= ly:
                m = 0.5 * (x0 + x1)
                stack += [(x0, m, y0, y1), (m, x1, y0, y1)]
            else:
                m = 0.5 * (y0 + y1)
                stack += [(x0, x1, y0, m), (x0, x1, m, y1)]
        B = np.array(blocks)
        X = B[:, 0, None, None] + B[:, 1, None, None] * g[None, :, None]
        Y = B[:, 2, None, None] + B[:, 3, None, None] * g[None, None, :]
        W = (B[:, 1] * B[:, 3])[:, None, None] * gw[None, :, None] * gw[None, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        W = factor * W / (X - Y) ** 2
        self.add(i, ((X - self.a[i]) / self.L[i]).ravel(), j, ((Y - self.a[j]) / self.L[j]).ravel(), W.ravel())

    def rule(self) -> KernelRule:
        cols = list(zip(*self.parts))
        return KernelRule(*(np.concatenate(c) for c in cols))


def kernel_rule(grid: Grid1D, k: int, level: int = 0, eta: float = 1.0) -> KernelRule:
    """Quadrature for |v|^2_{1/2} of degree-k splines on ``grid``; ``level`` raises point counts."""
    b = _Builder(grid)
    a, L = b.a, b.L
    n = grid.n_elements

    # same element: squared divided difference, exact
    g1, w1 = gauss_legendre01(k + 1)
    g2, w2 = gauss_legendre01(k + 2)
    S, R = np.meshgrid(g1, g2, indexing="ij")
    Wsr = (np.outer(w1, w2) / (S - R) ** 2).ravel()
    for i in range(n):
        b.add(i, S.ravel(), i, R.ravel(), Wsr)

    # neighbours through the shared node z: x = z - alpha, y = z + beta
    n_rho, n_beta = k + 1, k + 2 + 4 * level
    gr, wr = gauss_legendre01(n_rho)
    gb, wb = gauss_legendre01(n_beta)
    rho0, bet = np.meshgrid(gr, gb, indexing="ij")
    wrb = np.outer(wr, wb)
    n_far = k + 2 + 2 * level
    for i in range(n - 1):
        j = i + 1
        z, Sx, Ty = a[j], L[i], L[j]
        d = min(Sx, Ty)
        rho = d * rho0
        wq = 2.0 * d * wrb / (rho * (1.0 + bet) ** 2)
        for al, be in ((rho, rho * bet), (rho * bet, rho)):
            b.add(i, (1.0 - al / Sx).ravel(), j, (be / Ty).ravel(), wq.ravel())
        if Sx > Ty:
            b.far(i, z - Sx, z - Ty, j, z, z + Ty, n_far, eta, 2.0)
        elif Ty > Sx:
            b.far(i, z - Sx, z, j, z + Sx, z + Ty, n_far, eta, 2.0)

    for i in range(n):
        for j in range(i + 2, n):
            b.far(i, a[i], a[i] + L[i], j, a[j], a[j] + L[j], n_far, eta, 2.0)
    return b.rule()


def _weight_term(v: PiecewisePoly1D, level: int) -> float:
    """int v^2 / rho, rho = distance to the nearer end of the interval."""
    grid = v.grid
    lo, hi = grid.breakpoints[0], grid.breakpoints[-1]
    tol = 1e-12 * max(1.0, float(np.abs(v.values).max()))
    if abs(v.values[0, 0]) > tol or abs(v.values[-1, -1]) > tol:
        raise ValueError("weighted term is infinite unless v vanishes at both ends")
    mid = 0.5 * (lo + hi)
    g, w = gauss_legendre01(v.degree + 2 + 2 * level)
    total = 0.0
    for i, (x0, x1) in enumerate(zip(grid.breakpoints[:-1], grid.breakpoints[1:])):
        pieces = [(x0, min(x1, mid)), (max(x0, mid), x1)]
        for p0, p1 in pieces:
            if p1 <= p0:
                continue
            end = lo if p1 <= mid else hi
            stack = [(p0, p1)]
            while stack:
                c0, c1 = stack.pop()
                dist = min(abs(c0 - end), abs(c1 - end))
                touches = dist == 0.0
                if touches or (c1 - c0) <= dist:
                    x = c0 + (c1 - c0) * g
                    s = (x - grid.breakpoints[i]) / grid.lengths[i]
                    vals = v.eval_local(np.full(len(x), i), s)
                    total += (c1 - c0) * np.dot(w, vals**2 / np.abs(x - end))
                else:
                    m = 0.5 * (c0 + c1)
                    stack += [(c0, m), (m, c1)]
    return float(total)


def h12_seminorm(v: PiecewisePoly1D, rtol: float = 1e-8, max_level: int = 8, weighted: bool = False) -> float:
    """|v|^2_{1/2}: the double integral of (v(x)-v(y))^2/(x-y)^2 over I x I.

    With ``weighted`` the H^{1/2}_00 term int v^2/rho is added (v must vanish at both ends).
    """
    # rounding floor: a constant gives O(eps^2) noise, not an exact zero
    floor = (1e-12 * float(np.abs(v.values).max())) ** 2
    prev = None
    for level in range(max_level + 1):
        val = kernel_rule(v.grid, v.degree, level).apply(v)
        if weighted:
            val += _weight_term(v, level)
        if prev is not None and abs(val - prev) <= rtol * abs(val) + floor:
            return val
        prev = val
    raise H12ConvergenceError(f"seminorm refinement did not settle to {rtol:g} after {max_level} levels")


def _matrix_at(grid: Grid1D, k: int, level: int) -> np.ndarray:
    rule = kernel_rule(grid, k, level)
    dofs = global_dofs(grid.n_elements, k)
    nd = grid.n_elements * k + 1
    Vx, _ = lagrange_eval(k, rule.sx)
    Vy, _ = lagrange_eval(k, rule.sy)
    nq = len(rule.w)
    rows = np.repeat(np.arange(nq), k + 1)
    D = sp.coo_matrix(
        (np.concatenate([Vx.ravel(), -Vy.ravel()]),
         (np.concatenate([rows, rows]), np.concatenate([dofs[rule.ex].ravel(), dofs[rule.ey].ravel()]))),
        shape=(nq, nd),
    ).tocsr()
    A = (D.T @ sp.diags(rule.w) @ D).toarray()
    return 0.5 * (A + A.T)


def h12_matrix(grid: Grid1D, k: int = 1, level: int | None = None, rtol: float = 1e-10,
               max_level: int = 8) -> np.ndarray:
    """Seminorm matrix in the global nodal basis: |v|^2 = c^T A c.

    With ``level=None`` the rule is refined until successive matrices agree
    to ``rtol`` (entrywise, relative to the largest entry).
    """
    if level is not None:
        return _matrix_at(grid, k, level)
    prev = _matrix_at(grid, k, 0)
    for lv in range(1, max_level + 1):
        A = _matrix_at(grid, k, lv)
        if np.abs(A - prev).max() <= rtol * np.abs(A).max():
            return A
        prev = A
    raise H12ConvergenceError(f"seminorm matrix did not settle to {rtol:g} after {max_level} levels")


# --- piecewise quasi-uniformity and the lemma ratio ---------------------------


@dataclass
class PQUResult:
    accepted: bool
    runs: list[tuple[int, int]]  # element index ranges [start, stop)


def check_pqu(grid: Grid1D, m_bar: int, c_bar: float, rtol: float = 1e-12) -> PQUResult:
    """Greedy left-to-right split into maximal runs with max/min length <= c_bar."""
    L = grid.lengths
    runs = []
    start = 0
    lo = hi = L[0]
    for i in range(1, len(L)):
        nlo, nhi = min(lo, L[i]), max(hi, L[i])
        if nhi <= c_bar * nlo * (1.0 + rtol):
            lo, hi = nlo, nhi
        else:
            runs.append((start, i))
            start, lo, hi = i, L[i], L[i]
    runs.append((start, len(L)))
    return PQUResult(len(runs) <= m_bar, runs)


def lemma_ratio(v: PiecewisePoly1D, **kw) -> float:
    """|v|^2_{1/2} / (log(1 + R_h) * sum_e ||v||^2_{L^inf(e)})."""
    linf = v.linf_per_element()
    den = math.log1p(v.grid.ratio) * float(np.sum(linf**2))
    if den == 0.0:
        return 0.0
    return h12_seminorm(v, **kw) / den


def psi_example(N: int) -> PiecewisePoly1D:
    """Piecewise linear +-1 oscillator on N uniform elements: odd nodes 1, even nodes -1."""
    if N < 2:
        raise ValueError("N must be >= 2")
    nodal = np.where(np.arange(N + 1) % 2 == 1, 1.0, -1.0)
    return PiecewisePoly1D.from_nodal(Grid1D.uniform(N), nodal)


def junction_hat(grid: Grid1D, node: int) -> PiecewisePoly1D:
    nodal = np.zeros(grid.n_elements + 1)
    nodal[node] = 1.0
    return PiecewisePoly1D.from_nodal(grid, nodal)


def two_run_grid(n_per_run: int, R: float) -> Grid1D:
    """Two uniform runs of n elements, lengths 1/n and 1/(n R)."""
    big = np.full(n_per_run, 1.0 / n_per_run)
    return Grid1D.from_lengths(np.concatenate([big, big / R]))


def empirical_constant(grid: Grid1D) -> tuple[float, PiecewisePoly1D]:
    """Largest lemma ratio over a family of piecewise linear candidates.

    Candidates: every nodal hat, the +-1 oscillator, and the top generalized
    eigenvector of the seminorm matrix against a nodal l2 proxy of the
    L-infinity sum. Ratios are quadratic forms of the converged matrix.
    """
    from scipy.linalg import eigh

    n = grid.n_elements
    A = h12_matrix(grid, 1)
    # sum_e max(c_i^2, c_{i+1}^2) lies between this diagonal form and twice it
    d = np.zeros(n + 1)
    d[:-1] += 0.5
    d[1:] += 0.5
    _, vecs = eigh(A, np.diag(d))
    cands = np.column_stack([vecs[:, -1], np.where(np.arange(n + 1) % 2 == 1, 1.0, -1.0), np.eye(n + 1)])
    num = np.einsum("ic,ij,jc->c", cands, A, cands)
    sq = cands**2
    den = math.log1p(grid.ratio) * np.maximum(sq[:-1], sq[1:]).sum(axis=0)
    best = int(np.argmax(num / den))
    return float(num[best] / den[best]), PiecewisePoly1D.from_nodal(grid, cands[:, best])
