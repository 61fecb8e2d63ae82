"""Convergence-study driver: mesh schedules, patch-test gate, rate fits."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ErrorReport, fit_rate, report_solution
from .forms import StabilizationKind
from .mesh import PolyMesh, agglomerate, generate_quad_mesh, generate_voronoi_mesh, subdivide_edges, voronoi_seeds_for_h
from .problem import MANUFACTURED_SOLUTION, random_polynomial
from .report import abscissa, group_series
from .solve import solve_problem
from .vemspace import Orders, interpolate_global

log = logging.getLogger(__name__)

STUDIES = ("test1_quads", "test1_voronoi", "test2_voronoi", "test3_agglomerate", "h12", "single")

# default schedules; h is the nominal size (quad side or Voronoi target diameter)
DEFAULTS = {
    "test1_quads": {"h": [2**-2, 2**-3, 2**-4, 2**-5], "bnd_factors": [2**-4],
                    "orders": [[1, 1], [2, 1], [2, 2], [3, 1], [3, 2], [3, 3]]},
    "test1_voronoi": {"h": [2**-4], "bnd_factors": [1.0, 0.5, 0.25, 0.125],
                      "orders": [[1, 1], [2, 2], [3, 1], [4, 2]]},
    "test2_voronoi": {"h": [2**-2, 2**-3, 2**-4], "bnd_factors": [],
                      "orders": [[1, 1], [2, 1], [2, 2], [3, 2]]},
    "test3_agglomerate": {"fine_n": 32, "agglo": [2, 4, 8], "orders": [[1, 1], [2, 1], [3, 1]]},
    "single": {"h": [2**-3], "bnd_factors": [], "orders": [[2, 2]]},
}


class PatchTestError(RuntimeError):
    pass


@dataclass
class StudyConfig:
    study: str = "test1_quads"
    orders: list = field(default_factory=list)
    stabs: list = field(default_factory=lambda: ["dofi"])
    h: list = field(default_factory=list)
    bnd_factors: list | None = None
    fine_n: int = 32
    agglo: list = field(default_factory=list)
    rng_seed: int = 0
    tol: float = 1e-12
    out: str = "out"
    family: str | None = None

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; choose from {', '.join(STUDIES)}")
        d = DEFAULTS.get(self.study, {})
        self.orders = [tuple(o) for o in (self.orders or d.get("orders", []))]
        self.h = list(self.h or d.get("h", []))
        if self.bnd_factors is None:
            self.bnd_factors = list(d.get("bnd_factors", []))
        self.agglo = list(self.agglo or d.get("agglo", []))
        self.stabs = [StabilizationKind.parse(s).value for s in self.stabs]
        for ko, kb in self.orders:
            Orders(ko, kb)
        if self.study != "h12" and not self.schedule():
            raise ValueError("empty mesh schedule")

    @classmethod
    def from_json(cls, path, **overrides) -> "StudyConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def mesh_family(self) -> str:
        if self.family:
            return self.family
        return {"test1_quads": "quad", "test3_agglomerate": "agglomerate"}.get(self.study, "voronoi")

    def schedule(self) -> list[tuple]:
        """Mesh specs in output order."""
        fam = self.mesh_family
        if fam == "agglomerate":
            return [("agglomerate", self.fine_n, m, self.rng_seed) for m in self.agglo]
        out = []
        for h in self.h:
            for f in (self.bnd_factors or [None]):
                out.append((fam, float(h), f, self.rng_seed))
        return out


@lru_cache(maxsize=16)
def build_mesh(spec: tuple) -> PolyMesh:
    fam = spec[0]
    if fam == "agglomerate":
        _, fine_n, m, seed = spec
        fine = generate_quad_mesh(fine_n)
        n_coarse = max(1, round(2 * fine_n**2 / m**2))
        return agglomerate(fine, n_coarse, rng_seed=seed)
    _, h, factor, seed = spec
    if fam == "quad":
        n = round(1.0 / h)
        mesh = generate_quad_mesh(n)
    elif fam == "voronoi":
        mesh = generate_voronoi_mesh(voronoi_seeds_for_h(h), rng_seed=seed)
    else:
        raise ValueError(f"unknown mesh family {fam!r}")
    if factor is not None:
        mesh = subdivide_edges(mesh, factor * h)
    return mesh


def patch_test(mesh: PolyMesh, orders: Orders, stab, rng_seed: int = 0, tol: float = 1e-8) -> float:
    """Max DoF deviation when the exact solution is a random global P_kb polynomial."""
    ex = random_polynomial(orders.kb, rng_seed)
    sol = solve_problem(mesh, orders, stab, ex.f, ex.u)
    ui = interpolate_global(sol.layout, ex.u)
    err = float(np.abs(sol.u - ui).max() / max(1.0, np.abs(ui).max()))
    if err > tol:
        raise PatchTestError(f"patch test failed for k={orders}, {stab}: deviation {err:.3e}")
    return err


def run_case(spec: tuple, ko: int, kb: int, stab: str, tol: float = 1e-12) -> ErrorReport:
    mesh = build_mesh(spec)
    try:
        sol = solve_problem(mesh, Orders(ko, kb), stab, MANUFACTURED_SOLUTION.f, MANUFACTURED_SOLUTION.u, tol=tol)
    except Exception as exc:
        raise RuntimeError(f"mesh {spec}, k=({ko},{kb}), {stab}: {exc}") from exc
    rep = report_solution(sol, MANUFACTURED_SOLUTION, family=spec[0])
    rep.extra = {}
    return rep


def _workers() -> int:
    env = os.environ.get("VEMPOLY_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            log.warning("ignoring VEMPOLY_THREADS=%r", env)
    return n


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list[ErrorReport]
    rates: dict[str, dict[str, float]]
    patch_errors: dict[str, float]


def fit_series(rows: list[ErrorReport]) -> dict[str, dict[str, float]]:
    rates = {}
    for name, s in group_series(rows).items():
        if len(s) < 3:
            continue
        xname, x = abscissa(s)
        rates[name] = {
            "against": xname,
            "err_bulk": fit_rate(x, [r.err_bulk for r in s]).slope,
            "err_trace": fit_rate(x, [r.err_trace for r in s]).slope,
        }
    return rates


def run_study(cfg: StudyConfig) -> StudyResult:
    """Patch-test the first mesh, then run every (mesh, order, stab) case."""
    sched = cfg.schedule()
    first = build_mesh(sched[0])
    patch = {}
    for ko, kb in cfg.orders:
        for st in cfg.stabs:
            patch[f"k=({ko},{kb}) {st}"] = patch_test(first, Orders(ko, kb), st, cfg.rng_seed)
    cases = [(spec, ko, kb, st) for (ko, kb) in cfg.orders for st in cfg.stabs for spec in sched]
    workers = min(_workers(), len(cases))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(run_case, *c, cfg.tol) for c in cases]
            rows = [f.result() for f in futs]
    else:
        rows = [run_case(*c, cfg.tol) for c in cases]
    return StudyResult(cfg, rows, fit_series(rows), patch)
