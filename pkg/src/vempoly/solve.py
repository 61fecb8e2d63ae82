"""Global assembly, Dirichlet lifting, static condensation and the SPD solve."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import StabilizationKind, load_vector, local_stiffness
from .mesh import PolyMesh
from .vemspace import DofLayout, Element, Orders, build_dof_layout, build_projections

log = logging.getLogger(__name__)

DIRECT_MAX_DOFS = 200_000


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


@dataclass
class ElementData:
    """What survives assembly for post-processing one element."""

    dofs: np.ndarray
    pi0_grad: tuple[np.ndarray, np.ndarray]
    K: np.ndarray | None = None
    b: np.ndarray | None = None


@dataclass
class LinearSystem:
    A: sp.csr_matrix
    b: np.ndarray
    layout: DofLayout
    elements: list[ElementData] = field(default_factory=list)


@dataclass
class ReducedSystem:
    A: sp.csr_matrix
    b: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    g: np.ndarray  # values on ``fixed``
    n: int

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n)
        u[self.fixed] = self.g
        u[self.free] = x_free
        return u


class _ShapeCache:
    """Element operators keyed by shape up to translation."""

    def __init__(self, orders: Orders, stab: StabilizationKind, stab_scale: float, size: int = 64):
        self.orders, self.stab, self.scale = orders, stab, stab_scale
        self.size = size
        self._data: OrderedDict = OrderedDict()

    def get(self, poly: np.ndarray):
        rel = poly - poly[0]
        key = (len(poly), np.round(rel / max(np.ptp(rel), 1e-300), 11).tobytes())
        hit = self._data.get(key)
        if hit is not None:
            self._data.move_to_end(key)
            proj, K, origin = hit
            return proj, K, poly[0] - origin
        proj = build_projections(Element(poly), self.orders)
        K = local_stiffness(proj, self.stab, self.scale)
        self._data[key] = (proj, K, poly[0].copy())
        if len(self._data) > self.size:
            self._data.popitem(last=False)
        return proj, K, np.zeros(2)


def _shifted(f, shift):
    if not np.any(shift):
        return f
    return lambda p: f(np.asarray(p) + shift)


def assemble(mesh: PolyMesh, layout: DofLayout, orders: Orders, stab, f=None,
             stab_scale: float = 1.0, keep_local: bool = False) -> LinearSystem:
    """Sum local stiffness matrices and load vectors into global ones."""
    stab = StabilizationKind.parse(stab)
    cache = _ShapeCache(orders, stab, stab_scale)
    rows, cols, vals = [], [], []
    b = np.zeros(layout.n_dofs)
    data = []
    for k in range(mesh.n_elements):
        try:
            proj, K, shift = cache.get(mesh.polygon(k))
            bE = load_vector(proj, _shifted(f, shift)) if f is not None else np.zeros(len(K))
        except Exception as exc:
            raise AssemblyError(f"element {k}: {exc}") from exc
        dofs = layout.local_to_global[k]
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(K.ravel())
        np.add.at(b, dofs, bE)
        data.append(ElementData(dofs, proj.pi0_grad, K if keep_local else None, bE if keep_local else None))
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(layout.n_dofs, layout.n_dofs),
    ).tocsr()
    return LinearSystem(A, b, layout, data)


def apply_dirichlet(system: LinearSystem, g) -> ReducedSystem:
    """Fix boundary DoFs to point values of g and lift them to the right-hand side."""
    lay = system.layout
    fixed = lay.boundary_dofs
    mask = np.ones(lay.n_dofs, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    gc = np.asarray(g(lay.points[fixed]), dtype=float) if len(fixed) else np.zeros(0)
    A = system.A
    Aff = A[free][:, free].tocsr()
    bf = system.b[free] - A[free][:, fixed] @ gc
    return ReducedSystem(Aff, bf, free, fixed, gc, lay.n_dofs)


@dataclass
class Condensed:
    K: np.ndarray
    b: np.ndarray
    n_keep: int
    recover_mat: np.ndarray  # interior = recover_vec - recover_mat @ u_keep
    recover_vec: np.ndarray

    def recover(self, u_keep: np.ndarray) -> np.ndarray:
        return self.recover_vec - self.recover_mat @ u_keep


def condense(K: np.ndarray, b: np.ndarray, n_keep: int) -> Condensed:
    """Schur complement onto the first ``n_keep`` local DoFs."""
    if n_keep == len(K):
        return Condensed(K, b, n_keep, np.zeros((0, n_keep)), np.zeros(0))
    Kbb, Kbi = K[:n_keep, :n_keep], K[:n_keep, n_keep:]
    Kib, Kii = K[n_keep:, :n_keep], K[n_keep:, n_keep:]
    try:
        c = np.linalg.cholesky(Kii)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("singular interior block in static condensation") from None
    X = np.linalg.solve(c.T, np.linalg.solve(c, np.column_stack([Kib, b[n_keep:]])))
    Khat = Kbb - Kbi @ X[:, :-1]
    bhat = b[:n_keep] - Kbi @ X[:, -1]
    return Condensed(0.5 * (Khat + Khat.T), bhat, n_keep, X[:, :-1], X[:, -1])


def solve_spd(A, b, tol: float = 1e-12, direct_max: int = DIRECT_MAX_DOFS, maxiter: int | None = None):
    """Solve an SPD system: sparse direct up to ``direct_max`` unknowns, else Jacobi-PCG."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n)
    if n == 1:
        return np.array([b[0] / A[0, 0]])
    if n <= direct_max:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        x = lu.solve(b)
        for _ in range(3):
            r = b - A @ x
            if np.linalg.norm(r) <= tol * bnorm:
                break
            x += lu.solve(r)
        return x
    d = A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda v: v / d)
    history = []

    def cb(xk):
        history.append(float(np.linalg.norm(b - A @ xk) / bnorm)) if len(history) % 50 == 0 else history.append(np.nan)

    x, info = spla.cg(A, b, rtol=tol, atol=0.0, M=M, maxiter=maxiter or 20 * n, callback=cb)
    res = np.linalg.norm(b - A @ x) / bnorm
    if info != 0 or res > 10 * tol:
        hist = [h for h in history if h == h]
        raise SolverError(f"PCG did not converge: relative residual {res:.3e} after {len(history)} its", hist)
    return x


@dataclass
class Solution:
    mesh: PolyMesh
    orders: Orders
    stab: StabilizationKind
    layout: DofLayout
    u: np.ndarray
    elements: list[ElementData]

    @property
    def ndof(self) -> int:
        return self.layout.n_dofs


def solve_problem(mesh: PolyMesh, orders: Orders, stab, f, g, *, condensed: bool = True,
                  tol: float = 1e-12, stab_scale: float = 1.0, direct_max: int = DIRECT_MAX_DOFS) -> Solution:
    """Assemble and solve the Dirichlet problem -lap u = f, u = g on the boundary."""
    stab = StabilizationKind.parse(stab)
    layout = build_dof_layout(mesh, orders)
    if not condensed or orders.n_moments == 0:
        system = assemble(mesh, layout, orders, stab, f, stab_scale)
        red = apply_dirichlet(system, g)
        u = red.expand(solve_spd(red.A, red.b, tol, direct_max))
        return Solution(mesh, orders, stab, layout, u, system.elements)

    full = assemble(mesh, layout, orders, stab, f, stab_scale, keep_local=True)
    nbt = layout.n_boundary_type
    rows, cols, vals = [], [], []
    bb = np.zeros(nbt)
    conds = []
    for ed in full.elements:
        n_keep = int(np.sum(ed.dofs < nbt))
        c = condense(ed.K, ed.b, n_keep)
        keep = ed.dofs[:n_keep]
        rows.append(np.repeat(keep, n_keep))
        cols.append(np.tile(keep, n_keep))
        vals.append(c.K.ravel())
        np.add.at(bb, keep, c.b)
        conds.append(c)
        ed.K = ed.b = None
    Ab = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nbt, nbt)).tocsr()
    sub_layout = DofLayout(mesh, orders, [ed.dofs[ed.dofs < nbt] for ed in full.elements], nbt, nbt,
                           layout.boundary_dofs, layout.points)
    red = apply_dirichlet(LinearSystem(Ab, bb, sub_layout), g)
    ub = red.expand(solve_spd(red.A, red.b, tol, direct_max))
    u = np.zeros(layout.n_dofs)
    u[:nbt] = ub
    for ed, c in zip(full.elements, conds):
        u[ed.dofs[c.n_keep:]] = c.recover(ub[ed.dofs[: c.n_keep]])
    return Solution(mesh, orders, stab, layout, u, full.elements)
