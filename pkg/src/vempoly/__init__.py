"""Virtual element solver for the Poisson problem on polygonal meshes."""

from .mesh import PolyMesh, generate_quad_mesh, generate_voronoi_mesh, subdivide_edges, agglomerate
from .vemspace import Orders
from .forms import StabilizationKind
from .solve import solve_problem

__all__ = [
    "PolyMesh",
    "generate_quad_mesh",
    "generate_voronoi_mesh",
    "subdivide_edges",
    "agglomerate",
    "Orders",
    "StabilizationKind",
    "solve_problem",
]

__version__ = "0.1.0"
