"""Dyadic mesh matrices, regular structured meshes and adaptive finite volume solvers."""

from .adaptation import MarkSets, MeshUpdate, Thresholds, gradient_monitor, mark, mesh_update, strong_refine, weak_coarsen
from .errors import (
    GridMismatchError,
    InconsistentGridError,
    InstabilityError,
    MeshError,
    NoMotherError,
    NonPhysicalStateError,
    NumericalError,
)
from .fields import Field, common_coarsening, l1_distance, project_down, project_up, transfer
from .matrix import MeshMatrix, RefinementBounds, build_matrix, entry_count_and_memory, total_lines
from .topology import Direction, Grid, Interfaces, check_grid, interfaces, neighbors_in_grid

__version__ = "0.1.0"
