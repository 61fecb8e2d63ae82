"""Command line entry point: ``vempoly solve|study|h12|mesh``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import h12
from .errors import CSV_HEADER, report_solution
from .mesh import (
    MeshError,
    MeshFormatError,
    agglomerate,
    compute_metrics,
    generate_quad_mesh,
    generate_voronoi_mesh,
    load_mesh,
    save_mesh,
    subdivide_edges,
)
from .problem import MANUFACTURED_SOLUTION
from .report import emit_reports
from .solve import solve_problem
from .study import PatchTestError, StudyConfig, run_study
from .vemspace import Orders

log = logging.getLogger("vempoly")

STABS = ("dofi", "dofi-light", "trace")


def _cmd_solve(args) -> int:
    mesh = load_mesh(args.mesh)
    sol = solve_problem(mesh, Orders(args.ko, args.kb), args.stab, MANUFACTURED_SOLUTION.f, MANUFACTURED_SOLUTION.u, tol=args.tol)
    rep = report_solution(sol, MANUFACTURED_SOLUTION, family=Path(args.mesh).stem)
    print(CSV_HEADER)
    print(rep.csv_row())
    return 0


def _cmd_study(args) -> int:
    overrides = {"study": args.study, "rng_seed": args.seed, "out": args.out}
    if args.ko is not None or args.kb is not None:
        if args.ko is None or args.kb is None:
            raise SystemExit("--ko and --kb must be given together")
        overrides["orders"] = [[args.ko, args.kb]]
    if args.stab:
        overrides["stabs"] = args.stab
    if args.config:
        cfg = StudyConfig.from_json(args.config, **overrides)
    else:
        cfg = StudyConfig(**{k: v for k, v in overrides.items() if v is not None})
    if cfg.study == "h12":
        return _h12_table(h12_sizes(None), None, Path(cfg.out) / "h12.csv")
    try:
        res = run_study(cfg)
    except PatchTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    paths = emit_reports(res.rows, cfg.out, stem=cfg.study)
    (Path(cfg.out) / f"{cfg.study}_rates.json").write_text(
        json.dumps({"config": cfg.to_dict(), "rates": res.rates, "patch": res.patch_errors}, indent=2, sort_keys=True) + "\n"
    )
    for name, r in res.rates.items():
        print(f"{name}: slope vs {r['against']}  err_bulk {r['err_bulk']:.3f}  err_trace {r['err_trace']:.3f}")
    print(f"wrote {paths['csv']}")
    return 0


def h12_sizes(ns):
    return ns or [8, 16, 32, 64]


def _h12_table(ns, Rs, out) -> int:
    lines = ["N,seminorm,bound,ratio"]
    for N in ns:
        v = h12.psi_example(N)
        s = h12.h12_seminorm(v)
        bound = math.log1p(v.grid.ratio) * float(np.sum(v.linf_per_element() ** 2))
        lines.append(f"{N},{s:.10e},{bound:.10e},{s / bound:.10e}")
    if Rs:
        lines.append("")
        lines.append("R,elements,empirical_constant")
        for R in Rs:
            g = h12.two_run_grid(16, R)
            c, _ = h12.empirical_constant(g)
            lines.append(f"{R:g},{g.n_elements},{c:.10e}")
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)
    return 0


def _cmd_h12(args) -> int:
    return _h12_table(h12_sizes(args.N), args.R, args.out)


def _cmd_mesh(args) -> int:
    if args.mesh_cmd == "gen":
        if args.family == "quad":
            mesh = generate_quad_mesh(args.n)
        else:
            mesh = generate_voronoi_mesh(args.n, lloyd_iters=args.lloyd, rng_seed=args.seed)
        save_mesh(mesh, args.out)
    elif args.mesh_cmd == "subdivide":
        save_mesh(subdivide_edges(load_mesh(args.mesh), args.h_bnd), args.out)
    elif args.mesh_cmd == "agglomerate":
        save_mesh(agglomerate(load_mesh(args.mesh), args.seeds, rng_seed=args.seed), args.out)
    else:
        mesh = load_mesh(args.mesh)
        m = compute_metrics(mesh)
        info = {
            "vertices": mesh.n_vertices,
            "elements": mesh.n_elements,
            "edges": mesh.n_edges,
            "h": m.h,
            "h_bnd": m.h_bnd,
            "H": m.H,
            "log_term": m.log_term,
            "ell_min": int(m.ell_E.min()),
            "ell_max": int(m.ell_E.max()),
        }
        print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vempoly", description="Virtual element Poisson solver on polygonal meshes")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve the manufactured problem on a mesh file")
    s.add_argument("mesh")
    s.add_argument("--ko", type=int, default=1)
    s.add_argument("--kb", type=int, default=1)
    s.add_argument("--stab", choices=STABS, default="dofi")
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("study", help="run a convergence study, write CSV and SVG")
    s.add_argument("--study", default=None)
    s.add_argument("--config", help="JSON config; flags override its fields")
    s.add_argument("--ko", type=int)
    s.add_argument("--kb", type=int)
    s.add_argument("--stab", choices=STABS, action="append")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_study)

    s = sub.add_parser("h12", help="H^1/2 seminorm table for the oscillating example")
    s.add_argument("--N", type=int, nargs="+")
    s.add_argument("--R", type=float, nargs="+", help="also report empirical lemma constants on two-run grids")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_h12)

    m = sub.add_parser("mesh", help="mesh generation and inspection")
    msub = m.add_subparsers(dest="mesh_cmd", required=True)
    g = msub.add_parser("gen")
    g.add_argument("--family", choices=("quad", "voronoi"), default="quad")
    g.add_argument("--n", type=int, required=True, help="cells per side (quad) or seed count (voronoi)")
    g.add_argument("--lloyd", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g = msub.add_parser("subdivide")
    g.add_argument("mesh")
    g.add_argument("--h-bnd", type=float, required=True)
    g.add_argument("--out", required=True)
    g = msub.add_parser("agglomerate")
    g.add_argument("mesh")
    g.add_argument("--seeds", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g = msub.add_parser("info")
    g.add_argument("mesh")
    m.set_defaults(func=_cmd_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MeshError, MeshFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
