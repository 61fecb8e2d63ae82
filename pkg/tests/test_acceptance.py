"""Acceptance suite: one block per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
Parts that do not meet their threshold are kept at full tolerance and marked
as strict expected failures.
"""

import math

import numpy as np
import pytest

from conftest import random_convex_polygon, random_star_polygon, record
from vempoly.errors import fit_rate
from vempoly.forms import StabilizationKind, consistency_check, local_stiffness
from vempoly.h12 import empirical_constant, h12_seminorm, psi_example, two_run_grid
from vempoly.mesh import generate_quad_mesh, generate_voronoi_mesh
from vempoly.poly import dim_poly
from vempoly.study import build_mesh, patch_test, run_case
from vempoly.vemspace import Element, Orders, build_projections

pytestmark = pytest.mark.acceptance

STABS = ("dofi", "trace")


def strict_xfail(reason):
    return pytest.mark.xfail(strict=True, reason=reason)


# --- 1. patch test ------------------------------------------------------------


def test_criterion_1_patch():
    meshes = {
        "quads": generate_quad_mesh(4),
        "voronoi-16": generate_voronoi_mesh(16),
        "agglomerate": build_mesh(("agglomerate", 16, 4, 0)),
    }
    worst, where = 0.0, None
    for name, mesh in meshes.items():
        for kb in (1, 2):
            for ko in (kb, kb + 1, kb + 2):
                for st in STABS:
                    err = patch_test(mesh, Orders(ko, kb), st, rng_seed=ko + 10 * kb, tol=math.inf)
                    if err > worst:
                        worst, where = err, (name, ko, kb, st)
    ok = worst <= 1e-8
    record(1, ok, f"max DoF deviation {worst:.2e} (at {where}) <= 1e-8 over 36 configurations")
    assert ok


# --- 2. projections and consistency ------------------------------------------


def test_criterion_2_projection_consistency():
    rng = np.random.default_rng(2)
    kinds = list(StabilizationKind)
    worst_rep = worst_cons = 0.0
    for ko in range(1, 5):
        for kb in range(1, ko + 1):
            o = Orders(ko, kb)
            nk, nb, nm = dim_poly(ko), dim_poly(kb), o.n_moments
            for i in range(100):
                poly = random_convex_polygon(rng) if i % 2 else random_star_polygon(rng)
                proj = build_projections(Element(poly), o)
                rep = [np.abs(proj.pi_nabla_big @ proj.D_big - np.eye(nk)).max(),
                       np.abs(proj.pi_nabla @ proj.D[:, :nb] - np.eye(nk)[:, :nb]).max()]
                if nm:
                    rep.append(np.abs(proj.pi0 @ proj.D[:, :nm] - np.eye(nm)).max())
                worst_rep = max(worst_rep, *rep)
                worst_cons = max(worst_cons, consistency_check(proj, rng.standard_normal(nk), kinds[i % 3],
                                                               n_random=2, rng=i))
    ok = worst_rep <= 1e-10 and worst_cons <= 1e-10
    record(2, ok, f"reproduction {worst_rep:.2e}, consistency {worst_cons:.2e} (<= 1e-10, 1000 polygons)")
    assert ok


# --- 3. bulk rates on quads -----------------------------------------------------

C3_ORDERS = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]
C3_H = [2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5]


@pytest.fixture(scope="module")
def test1_quads():
    return {}


def _c3_series(cache, ko, kb, st):
    key = (ko, kb, st)
    if key not in cache:
        cache[key] = [run_case(("quad", h, 2.0**-4, 0), ko, kb, st) for h in C3_H]
    return cache[key]


C3_CASES = []
for _k in C3_ORDERS:
    for _st in STABS:
        marks = []
        if _k == (3, 1) and _st == "trace":
            marks = [strict_xfail("k=(3,1) trace: boundary error term h_bnd^1 dominates at h_bnd = h/16")]
        C3_CASES.append(pytest.param(*_k, _st, marks=marks, id=f"k{_k[0]}{_k[1]}-{_st}"))


@pytest.mark.parametrize("ko,kb,st", C3_CASES)
def test_criterion_3_bulk_rate(test1_quads, ko, kb, st):
    rows = _c3_series(test1_quads, ko, kb, st)
    slope = fit_rate(C3_H, [r.err_bulk for r in rows]).slope
    ok = slope >= ko - 0.25
    record(3, ok, f"k=({ko},{kb}) {st}: err_bulk slope {slope:.3f} (need >= {ko - 0.25:.2f})")
    assert ok


# --- 4. edge refinement at fixed h ----------------------------------------------

C4_FACTORS = [1.0, 0.5, 0.25, 0.125]


@pytest.fixture(scope="module")
def test1_voronoi():
    return {}


def _c4_series(cache, ko, kb, st):
    key = (ko, kb, st)
    if key not in cache:
        cache[key] = [run_case(("voronoi", 2.0**-4, f, 0), ko, kb, st) for f in C4_FACTORS]
    return cache[key]


@pytest.mark.parametrize("st", STABS)
@pytest.mark.parametrize("k", [(1, 1), (2, 2)], ids=["k11", "k22"])
def test_criterion_4a_flat(test1_voronoi, k, st):
    rows = _c4_series(test1_voronoi, *k, st)
    drops = {q: 1 - getattr(rows[-1], q) / getattr(rows[0], q) for q in ("err_bulk", "err_trace")}
    ok = all(d < 0.2 for d in drops.values())
    record(4, ok, f"(a) k={k} {st}: total drop bulk {drops['err_bulk']:+.1%}, "
                  f"trace {drops['err_trace']:+.1%} (need < 20%)")
    assert ok


C4B_FAIL = strict_xfail("pre-asymptotic edge-refinement slope on this Voronoi family")
C4B_CASES = [
    pytest.param(3, 1, "dofi", id="k31-dofi"),
    pytest.param(3, 1, "trace", id="k31-trace", marks=[C4B_FAIL]),
    pytest.param(4, 2, "dofi", id="k42-dofi", marks=[C4B_FAIL]),
    pytest.param(4, 2, "trace", id="k42-trace", marks=[C4B_FAIL]),
]


@pytest.mark.parametrize("ko,kb,st", C4B_CASES)
def test_criterion_4b_initial_slope(test1_voronoi, ko, kb, st):
    rows = _c4_series(test1_voronoi, ko, kb, st)[:3]
    slope = fit_rate([r.h_bnd for r in rows], [r.err_trace for r in rows]).slope
    ok = slope >= kb - 0.3
    record(4, ok, f"(b) k=({ko},{kb}) {st}: initial err_trace slope {slope:.3f} vs h_bnd (need >= {kb - 0.3:.1f})")
    assert ok


# --- 5. enrichment gain on Voronoi ------------------------------------------------


def test_criterion_5_enrichment_gain():
    spec = ("voronoi", 2.0**-4, None, 0)
    e = {k: run_case(spec, *k, "dofi").err_bulk for k in [(1, 1), (2, 1), (2, 2), (3, 2)]}
    r1, r2 = e[(1, 1)] / e[(2, 1)], e[(2, 2)] / e[(3, 2)]
    ok = r1 >= 2 and r2 >= 5
    record(5, ok, f"err_bulk ratio (1,1)/(2,1) = {r1:.2f} (>= 2), (2,2)/(3,2) = {r2:.2f} (>= 5)")
    assert ok


# --- 6. agglomerates -----------------------------------------------------------


def test_criterion_6_agglomerates():
    ok = True
    parts = []
    for m in (2, 4, 8):
        spec = ("agglomerate", 32, m, 0)
        base = run_case(spec, 1, 1, "dofi").err_bulk
        p21 = 100 * run_case(spec, 2, 1, "dofi").err_bulk / base
        p31 = 100 * run_case(spec, 3, 1, "dofi").err_bulk / base
        ok &= p31 < p21 < 100
        parts.append(f"h~{m}h_bnd: (2,1) {p21:.1f}%, (3,1) {p31:.1f}%")
    record(6, ok, "; ".join(parts) + " (need (3,1) < (2,1) < 100%)")
    assert ok


# --- 7. H^1/2 sharpness and lemma ratio ----------------------------------------------


def test_criterion_7a_psi_scaling():
    vals = [h12_seminorm(psi_example(N)) / N for N in (8, 16, 32, 64)]
    spread = max(vals) / min(vals)
    ok = spread <= 2
    record(7, ok, f"(a) |psi_N|^2/N = {', '.join(f'{v:.3f}' for v in vals)}; c2/c1 = {spread:.3f} (<= 2)")
    assert ok


@strict_xfail("the R-independent part of the seminorm over log(1+R) dominates at R = 1")
def test_criterion_7b_lemma_ratio_bounded():
    consts = [empirical_constant(two_run_grid(16, R))[0] for R in (1.0, 10.0, 100.0, 1000.0)]
    spread = max(consts) / min(consts)
    ok = spread <= 3
    record(7, ok, f"(b) empirical constants R=1,10,100,1000: {', '.join(f'{c:.3f}' for c in consts)}; "
                  f"max/min = {spread:.2f} (<= 3)")
    assert ok


# --- 8. stabilization kernel --------------------------------------------------------


def test_criterion_8_kernel():
    rng = np.random.default_rng(8)
    pairs = [(ko, kb) for ko in range(1, 5) for kb in range(1, ko + 1)]
    kinds = list(StabilizationKind)
    violations = 0
    for i in range(200):
        poly = random_convex_polygon(rng) if i % 2 else random_star_polygon(rng)
        o = Orders(*pairs[rng.integers(len(pairs))])
        proj = build_projections(Element(poly), o)
        K = local_stiffness(proj, kinds[i % 3])
        ev, vec = np.linalg.eigh(K)
        one = proj.D[:, 0] / np.linalg.norm(proj.D[:, 0])
        bad = (np.abs(K - K.T).max() > 1e-12 * ev[-1]
               or abs(ev[0]) > 1e-10 * ev[-1]
               or ev[1] <= 1e-10 * ev[-1]
               or abs(abs(vec[:, 0] @ one) - 1) > 1e-8)
        violations += bool(bad)
    ok = violations == 0
    record(8, ok, f"{violations} kernel/PSD violations over 200 random elements")
    assert ok


# --- 9. trace stabilization robustness in ell_E --------------------------------------


def test_criterion_9_trace_robust():
    subdiv = [1, 2, 4, 8, 16]
    series = {st: [run_case(("quad", 2.0**-4, 1.0 / s, 0), 1, 1, st) for s in subdiv] for st in STABS}
    ell = [r.ell_max for r in series["trace"]]
    var = {st: max(r.err_trace for r in rows) / min(r.err_trace for r in rows) for st, rows in series.items()}
    ok = var["trace"] < 1.3 and var["dofi"] > var["trace"]
    record(9, ok, f"ell_E {ell[0]}..{ell[-1]}: err_trace max/min trace {var['trace']:.3f} (< 1.3), "
                  f"dofi {var['dofi']:.3f} (> trace)")
    assert ok
