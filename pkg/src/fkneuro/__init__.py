"""Protein-spreading simulations on brain meshes and connectomes.

Two discretizations of the same reaction-diffusion dynamics: an
interior-penalty DG method on polytopal meshes and a reduced graph
formulation on the connectome, plus the SUVR normalization and Braak
staging post-processing used to compare them.
"""

from . import dg, geometry, graphfk, staging
from .config import SimulationConfig, load_config, serialize_config
from .harness import compare, run, sweep
from .trajectory import Trajectory, first_crossing

__version__ = "0.1.0"

__all__ = [
    "SimulationConfig",
    "Trajectory",
    "compare",
    "dg",
    "first_crossing",
    "geometry",
    "graphfk",
    "load_config",
    "run",
    "serialize_config",
    "staging",
    "sweep",
]
