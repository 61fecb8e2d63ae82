"""Polygonal meshes of the unit square: generation, transforms, IO, metrics."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi, cKDTree
from scipy.spatial.distance import pdist

from .poly import centroid, signed_area

AREA_TOL = 1e-10


class MeshError(ValueError):
    """A PolyMesh invariant is violated."""


class MeshFormatError(ValueError):
    """A mesh file cannot be parsed."""


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    elements: tuple[int, ...]

    @property
    def is_boundary(self) -> bool:
        return len(self.elements) == 1


@dataclass(eq=False)
class PolyMesh:
    vertices: np.ndarray
    elements: list[np.ndarray]
    boundary: np.ndarray = field(default=None)  # per-vertex bool

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.elements = [np.asarray(e, dtype=int) for e in self.elements]
        if self.boundary is None:
            self.boundary = self._boundary_from_edges()
        self.boundary = np.asarray(self.boundary, dtype=bool)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def polygon(self, i: int) -> np.ndarray:
        return self.vertices[self.elements[i]]

    @cached_property
    def edges(self) -> list[Edge]:
        """Unique edges (a < b), sorted, with incident element lists."""
        inc: dict[tuple[int, int], list[int]] = {}
        for k, el in enumerate(self.elements):
            for a, b in zip(el, np.roll(el, -1)):
                key = (int(min(a, b)), int(max(a, b)))
                inc.setdefault(key, []).append(k)
        return [Edge(a, b, tuple(inc[(a, b)])) for a, b in sorted(inc)]

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(e.a, e.b): i for i, e in enumerate(self.edges)}

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def _boundary_from_edges(self) -> np.ndarray:
        flags = np.zeros(len(self.vertices), dtype=bool)
        for e in self.edges:
            if e.is_boundary:
                flags[[e.a, e.b]] = True
        return flags

    def areas(self) -> np.ndarray:
        return np.array([signed_area(self.polygon(i)) for i in range(self.n_elements)])

    def centroids(self) -> np.ndarray:
        return np.array([centroid(self.polygon(i)) for i in range(self.n_elements)])

    def equals(self, other: "PolyMesh", tol: float = 0.0) -> bool:
        if self.n_vertices != other.n_vertices or self.n_elements != other.n_elements:
            return False
        if np.max(np.abs(self.vertices - other.vertices), initial=0.0) > tol:
            return False
        if not np.array_equal(self.boundary, other.boundary):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))

    def validate(self, domain_area: float = 1.0) -> "PolyMesh":
        """Check the PolyMesh invariants; raise MeshError on the first violation."""
        nv = self.n_vertices
        for k, el in enumerate(self.elements):
            if len(el) < 3:
                raise MeshError(f"element {k}: fewer than 3 vertices")
            if el.min() < 0 or el.max() >= nv:
                raise MeshError(f"element {k}: vertex index out of range")
            if len(set(el.tolist())) != len(el):
                raise MeshError(f"element {k}: repeated vertex (not a simple polygon)")
            if signed_area(self.polygon(k)) <= 0:
                raise MeshError(f"element {k}: not counterclockwise (signed area <= 0)")
        total = float(self.areas().sum())
        if abs(total - domain_area) > AREA_TOL:
            raise MeshError(f"elements do not cover the domain: area sum {total!r} != {domain_area!r}")
        for e in self.edges:
            if len(e.elements) > 2:
                raise MeshError(f"edge ({e.a},{e.b}) shared by {len(e.elements)} elements")
            if len(e.elements) == 2 and e.elements[0] == e.elements[1]:
                raise MeshError(f"edge ({e.a},{e.b}) used twice by element {e.elements[0]}")
            if e.is_boundary and not (self.boundary[e.a] and self.boundary[e.b]):
                raise MeshError(f"boundary edge ({e.a},{e.b}) has unflagged vertices")
        return self

    def star_shape_warning(self) -> list[int]:
        """Elements failing the centroid-visibility heuristic (warning only)."""
        bad = []
        for k in range(self.n_elements):
            p = self.polygon(k)
            c = centroid(p)
            q = np.roll(p, -1, axis=0)
            cr = (p[:, 0] - c[0]) * (q[:, 1] - c[1]) - (q[:, 0] - c[0]) * (p[:, 1] - c[1])
            if np.any(cr <= 0):
                bad.append(k)
        if bad:
            warnings.warn(f"{len(bad)} element(s) not star-shaped w.r.t. their centroid", stacklevel=2)
        return bad


# --- metrics ---------------------------------------------------------------


@dataclass
class MeshMetrics:
    h_E: np.ndarray
    h_bnd_E: np.ndarray
    H_E: np.ndarray
    ell_E: np.ndarray
    h: float
    h_bnd: float
    H: float
    log_term: float


def element_diameter(poly) -> float:
    return float(pdist(np.asarray(poly)).max())


def compute_metrics(mesh: PolyMesh) -> MeshMetrics:
    hE, hb, HE, ell = [], [], [], []
    for k in range(mesh.n_elements):
        p = mesh.polygon(k)
        lens = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        hE.append(element_diameter(p))
        hb.append(lens.max())
        HE.append(lens.max() / lens.min())
        ell.append(len(p))
    hE, hb, HE = map(np.array, (hE, hb, HE))
    H = float(HE.max())
    return MeshMetrics(hE, hb, HE, np.array(ell), float(hE.max()), float(hb.max()), H, math.log1p(H))


# --- generators ------------------------------------------------------------


def generate_quad_mesh(n: int) -> PolyMesh:
    if n < 1:
        raise ValueError("n must be >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # [row j (y), col i (x)]
    els = [
        np.array([vid[j, i], vid[j, i + 1], vid[j + 1, i + 1], vid[j + 1, i]])
        for j in range(n)
        for i in range(n)
    ]
    bnd = (np.isclose(verts, 0.0) | np.isclose(verts, 1.0)).any(axis=1)
    return PolyMesh(verts, els, bnd)


def subdivide_edges(mesh: PolyMesh, target_h: float) -> PolyMesh:
    """Split each edge of length L into ceil(L / target_h) equal pieces."""
    if not target_h > 0:
        raise ValueError("target_h must be positive")
    verts = [v for v in mesh.vertices]
    bnd = list(mesh.boundary)
    inner: dict[tuple[int, int], list[int]] = {}
    for e in mesh.edges:
        p, q = mesh.vertices[e.a], mesh.vertices[e.b]
        m = max(1, math.ceil(np.linalg.norm(q - p) / target_h - 1e-9))
        ids = []
        for j in range(1, m):
            verts.append(p + (j / m) * (q - p))
            bnd.append(e.is_boundary)
            ids.append(len(verts) - 1)
        inner[(e.a, e.b)] = ids
    els = []
    for el in mesh.elements:
        cyc = []
        for a, b in zip(el, np.roll(el, -1)):
            cyc.append(int(a))
            mids = inner[(min(a, b), max(a, b))]
            cyc.extend(mids if a < b else mids[::-1])
        els.append(np.array(cyc))
    return PolyMesh(np.array(verts), els, np.array(bnd))


def _reflect(seeds: np.ndarray) -> np.ndarray:
    x, y = seeds[:, 0], seeds[:, 1]
    return np.vstack(
        [
            seeds,
            np.column_stack([-x, y]),
            np.column_stack([2.0 - x, y]),
            np.column_stack([x, -y]),
            np.column_stack([x, 2.0 - y]),
        ]
    )


def _voronoi_cells(seeds: np.ndarray):
    """Clipped Voronoi cells of seeds in the unit square (mirror trick)."""
    vor = Voronoi(_reflect(seeds))
    cells = []
    for i in range(len(seeds)):
        reg = vor.regions[vor.point_region[i]]
        if -1 in reg or len(reg) < 3:
            raise MeshError(f"unbounded Voronoi cell for seed {i}")
        cells.append(np.array(reg))
    return vor.vertices, cells


def _lloyd_seeds(n_seeds: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    seeds = rng.random((n_seeds, 2))
    if n_seeds == 1:
        return np.array([[0.5, 0.5]])
    for _ in range(iters):
        pts, cells = _voronoi_cells(seeds)
        seeds = np.array([centroid(_ccw(pts[c], s)) for c, s in zip(cells, seeds)])
    return seeds


def _ccw(poly: np.ndarray, around) -> np.ndarray:
    ang = np.arctan2(poly[:, 1] - around[1], poly[:, 0] - around[0])
    return poly[np.argsort(ang)]


def _merge_close(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Union near-coincident points; returns (new points, old->new map)."""
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(points))])
    uniq, inv = np.unique(roots, return_inverse=True)
    new = np.array([points[roots == r].mean(axis=0) for r in uniq])
    return new, inv


def generate_voronoi_mesh(n_seeds: int, lloyd_iters: int = 100, rng_seed: int = 0) -> PolyMesh:
    """Clipped Voronoi mesh of Lloyd-relaxed seeds in [0, 1]^2."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if n_seeds == 1:
        return generate_quad_mesh(1)
    rng = np.random.default_rng(rng_seed)
    seeds = _lloyd_seeds(n_seeds, lloyd_iters, rng)
    pts, cells = _voronoi_cells(seeds)
    used = np.unique(np.concatenate(cells))
    remap = -np.ones(len(pts), dtype=int)
    remap[used] = np.arange(len(used))
    pts = pts[used].copy()
    for c in range(2):
        for v in (0.0, 1.0):
            pts[np.abs(pts[:, c] - v) < 1e-9, c] = v
    pts, inv = _merge_close(pts, 1e-10)
    els = []
    for c, s in zip(cells, seeds):
        ids = inv[remap[c]]
        ang = np.arctan2(pts[ids, 1] - s[1], pts[ids, 0] - s[0])
        ids = ids[np.argsort(ang)]
        keep = ids != np.roll(ids, 1)
        ids = ids[keep]
        if len(ids) < 3 or signed_area(pts[ids]) <= 1e-14:
            raise MeshError("degenerate (zero-area) Voronoi cell")
        els.append(ids)
    bnd = (np.isclose(pts, 0.0, atol=1e-12) | np.isclose(pts, 1.0, atol=1e-12)).any(axis=1)
    return PolyMesh(pts, els, bnd)


def voronoi_seeds_for_h(h: float) -> int:
    """Seed count whose Lloyd-relaxed (near-hexagonal) cells have diameter ~ h."""
    return max(1, round((2.0 * math.sqrt(2.0 / (3.0 * math.sqrt(3.0))) / h) ** 2))


def agglomerate(fine: PolyMesh, n_coarse_seeds: int, rng_seed: int = 0, seeds=None) -> PolyMesh:
    """Merge fine elements by nearest coarse seed; one polygon per connected group.

    Agglomerate boundaries keep every fine vertex on them. ``seeds`` overrides
    the Lloyd-relaxed random seeds.
    """
    if n_coarse_seeds < 1:
        raise ValueError("n_coarse_seeds must be >= 1")
    if seeds is None:
        seeds = _lloyd_seeds(n_coarse_seeds, 30, np.random.default_rng(rng_seed))
    seeds = np.asarray(seeds, dtype=float)
    cents = fine.centroids()
    _, owner = cKDTree(seeds).query(cents)

    adj: dict[int, list[int]] = {k: [] for k in range(fine.n_elements)}
    for e in fine.edges:
        if len(e.elements) == 2:
            i, j = e.elements
            if owner[i] == owner[j]:
                adj[i].append(j)
                adj[j].append(i)
    group = -np.ones(fine.n_elements, dtype=int)
    groups: list[list[int]] = []
    for s in range(len(seeds)):
        for start in np.flatnonzero(owner == s):
            if group[start] >= 0:
                continue
            comp, stack = [], [start]
            group[start] = len(groups)
            while stack:
                k = stack.pop()
                comp.append(k)
                for j in adj[k]:
                    if group[j] < 0:
                        group[j] = len(groups)
                        stack.append(j)
            groups.append(sorted(comp))

    cycles = []
    for g, members in enumerate(groups):
        nxt: dict[int, int] = {}
        for k in members:
            el = fine.elements[k]
            for a, b in zip(el, np.roll(el, -1)):
                inc = fine.edges[fine.edge_index[(min(a, b), max(a, b))]].elements
                if all(group[j] == g for j in inc) and len(inc) == 2:
                    continue
                if int(a) in nxt:
                    raise MeshError(f"agglomerate {g}: boundary is not a single simple cycle")
                nxt[int(a)] = int(b)
        first = fine.elements[members[0]]
        start = next(int(v) for v in first if int(v) in nxt)
        cyc = [start]
        while nxt[cyc[-1]] != start:
            cyc.append(nxt[cyc[-1]])
            if len(cyc) > len(nxt):
                raise MeshError(f"agglomerate {g}: boundary is not a single simple cycle")
        if len(cyc) != len(nxt):
            raise MeshError(f"agglomerate {g}: boundary is not a single simple cycle (hole)")
        cycles.append(cyc)

    used = sorted({v for c in cycles for v in c})
    remap = {v: i for i, v in enumerate(used)}
    els = [np.array([remap[v] for v in c]) for c in cycles]
    return PolyMesh(fine.vertices[used], els, fine.boundary[used])


# --- IO --------------------------------------------------------------------


def mesh_to_dict(mesh: PolyMesh) -> dict:
    return {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "elements": [[int(i) for i in el] for el in mesh.elements],
        "boundary": [int(b) for b in mesh.boundary],
    }


def mesh_from_dict(data: dict) -> PolyMesh:
    for key in ("vertices", "elements", "boundary"):
        if key not in data:
            raise MeshFormatError(f"missing field '{key}'")
    try:
        verts = np.array(data["vertices"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError(f"field 'vertices': {exc}") from None
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshFormatError("field 'vertices': expected a list of [x, y] pairs")
    els = []
    for k, el in enumerate(data["elements"]):
        if not isinstance(el, list) or not all(isinstance(i, int) for i in el):
            raise MeshFormatError(f"field 'elements[{k}]': expected a list of integers")
        els.append(np.array(el, dtype=int))
    bnd = data["boundary"]
    if len(bnd) != len(verts) or any(b not in (0, 1) for b in bnd):
        raise MeshFormatError("field 'boundary': expected one 0/1 flag per vertex")
    return PolyMesh(verts, els, np.array(bnd, dtype=bool))


def save_mesh(mesh: PolyMesh, path) -> None:
    Path(path).write_text(json.dumps(mesh_to_dict(mesh)) + "\n")


def load_mesh(path, validate: bool = True) -> PolyMesh:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise MeshFormatError(f"{path}: top level must be an object")
    mesh = mesh_from_dict(data)
    return mesh.validate() if validate else mesh
