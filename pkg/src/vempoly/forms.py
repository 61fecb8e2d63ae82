"""Local discrete bilinear form (consistency + stabilization) and load vector."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .vemspace import Element, ElementProjections, Orders, build_projections, trace_matrices


class StabilizationKind(str, enum.Enum):
    DOFI = "dofi"
    DOFI_LIGHT = "dofi-light"
    TRACE = "trace"

    @classmethod
    def parse(cls, value) -> "StabilizationKind":
        if isinstance(value, cls):
            return value
        aliases = {"dofi-dofi": "dofi", "dofidofi": "dofi", "light": "dofi-light"}
        return cls(aliases.get(str(value).lower(), str(value).lower()))


@dataclass
class ElementStiffness:
    K: np.ndarray
    b: np.ndarray


def consistency_matrix(proj: ElementProjections) -> np.ndarray:
    P = proj.pi_nabla
    return P.T @ proj.grad_gram @ P


def _consistency_big(proj: ElementProjections) -> np.ndarray:
    P = proj.pi_nabla_big
    return P.T @ proj.grad_gram @ P


def _stab_dofi_big(proj: ElementProjections, light: bool = False) -> np.ndarray:
    R = np.eye(proj.n_big) - proj.D_big @ proj.pi_nabla_big
    if light:
        R = proj.E @ R
    return R.T @ R


def _stab_trace_big(proj: ElementProjections) -> np.ndarray:
    el, ko = proj.element, proj.orders.ko
    eq = el.edge_quad(2 * ko)
    _, dPhi = trace_matrices(el.ell, ko, proj.n_big, eq.params)
    ds_trace = dPhi / el.lengths[:, None, None]
    gx, gy = el.basis(ko).grad(eq.points.reshape(-1, 2))
    nq = len(eq.params)
    ds_poly = (gx.reshape(el.ell, nq, -1) * el.tangents[:, 0, None, None]
               + gy.reshape(el.ell, nq, -1) * el.tangents[:, 1, None, None])
    R = (ds_trace - ds_poly @ proj.pi_nabla_big).reshape(-1, proj.n_big)
    return el.diameter * (R.T * eq.weights.ravel()) @ R


def stab_dofi(proj: ElementProjections, light: bool = False) -> np.ndarray:
    """DoF-vector stabilization on (I - Pi_nabla) in the enlarged space.

    ``light`` evaluates only at the true boundary DoF nodes.
    """
    if light:
        R = np.eye(proj.n_local) - proj.D @ proj.pi_nabla
        return R.T @ R
    return proj.T.T @ _stab_dofi_big(proj) @ proj.T


def stab_trace(proj: ElementProjections) -> np.ndarray:
    return proj.T.T @ _stab_trace_big(proj) @ proj.T


def stabilization(proj: ElementProjections, kind) -> np.ndarray:
    kind = StabilizationKind.parse(kind)
    if kind is StabilizationKind.DOFI:
        return stab_dofi(proj)
    if kind is StabilizationKind.DOFI_LIGHT:
        return stab_dofi(proj, light=True)
    return stab_trace(proj)


def local_stiffness(proj: ElementProjections, kind, stab_scale: float = 1.0) -> np.ndarray:
    K = consistency_matrix(proj) + stab_scale * stabilization(proj, kind)
    return 0.5 * (K + K.T)


def big_stiffness(proj: ElementProjections, kind, stab_scale: float = 1.0) -> np.ndarray:
    """a_h^E on the enlarged representation (acts on V_k(E) + P_ko(E))."""
    kind = StabilizationKind.parse(kind)
    if kind is StabilizationKind.TRACE:
        S = _stab_trace_big(proj)
    else:
        S = _stab_dofi_big(proj, light=kind is StabilizationKind.DOFI_LIGHT)
    return _consistency_big(proj) + stab_scale * S


def load_vector(proj: ElementProjections, f) -> np.ndarray:
    """Local load vector for (f_h, v_h)_E."""
    el, orders = proj.element, proj.orders
    ko, kb, ell = orders.ko, orders.kb, el.ell
    b = np.zeros(proj.n_local)
    q = el.quad(2 * ko + 2)
    fq = np.asarray(f(q.points), dtype=float)
    if ko == 1:
        # (int_E f) * boundary mean of the (piecewise linear) test function
        b[:ell] = (fq @ q.weights) * 0.5 * (el.lengths + np.roll(el.lengths, 1)) / el.perimeter
        return b
    nm = orders.n_moments
    m = el.basis(ko - 2).eval(q.points)
    fmom = (fq * q.weights) @ m
    coef = np.linalg.solve(proj.mass[:nm, :nm], fmom)
    b[ell * kb :] = el.area * coef
    return b


def element_system(polygon, orders: Orders, kind, f=None, stab_scale: float = 1.0):
    proj = build_projections(Element(polygon), orders)
    K = local_stiffness(proj, kind, stab_scale)
    b = load_vector(proj, f) if f is not None else np.zeros(proj.n_local)
    return proj, ElementStiffness(K, b)


def consistency_check(proj: ElementProjections, coeffs, kind, n_random: int = 5, rng=None) -> float:
    """Relative residual of a_h^E(q, v) - a^E(q, v) for q in P_ko, random v.

    a^E(q, v) uses integration by parts on the DoF data of v.
    """
    rng = np.random.default_rng(rng)
    c = np.asarray(coeffs, dtype=float)
    qbig = proj.D_big @ c
    Kb = big_stiffness(proj, kind)
    Bt = proj.B_big.copy()
    Bt[0] = 0.0
    worst = 0.0
    for _ in range(n_random):
        v = proj.T @ rng.standard_normal(proj.n_local)
        lhs = qbig @ Kb @ v
        rhs = c @ Bt @ v
        scale = max(np.linalg.norm(Kb, 2) * np.linalg.norm(qbig) * np.linalg.norm(v), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
