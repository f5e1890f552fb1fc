"""Lattice-based coverage, search and formation building for 3D robot swarms."""

__version__ = "0.1.0"

from .geometry import (CoveringGrid, LatticeKind, LatticeSpec, Region, covering_set,  # noqa: E402
                       min_connectivity_ratio, nearest_vertex, volumetric_quotient)
from .coverage import run_coverage, run_shape_formation  # noqa: E402
from .search import SearchScenario, run_search  # noqa: E402
from .formation import FORMATION_PRESETS, FormationScenario, run_formation  # noqa: E402

__all__ = [
    "CoveringGrid", "LatticeKind", "LatticeSpec", "Region", "covering_set", "min_connectivity_ratio",
    "nearest_vertex", "volumetric_quotient", "run_coverage", "run_shape_formation", "SearchScenario",
    "run_search", "FORMATION_PRESETS", "FormationScenario", "run_formation",
]
