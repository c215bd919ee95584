"""Synthetic moving-monitor experiments and snapshot output."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fields
from .adaptation import mark, mesh_update, strong_refine, weak_coarsen
from .config import ExperimentConfig
from .matrix import build_matrix
from .topology import Grid, check_grid

log = logging.getLogger(__name__)

__all__ = ["monitor_value", "GenericResult", "run_generic", "write_snapshot"]

_WIDTH = 100.0


def _gauss(x, cx, cy):
    return np.exp(-_WIDTH * ((x[..., 0] - cx) ** 2 + (x[..., 1] - cy) ** 2))


def monitor_value(which: str, x, t: float) -> np.ndarray:
    """Analytic monitors of the generic experiments at points ``x`` (shape ``(..., 2)``).

    * ``M1``: Gaussian moving along the diagonal from (0.1, 0.1).
    * ``M2``: Gaussian on the circle of radius 0.9, angle ``pi t / 2``.
    * ``M3``: ``M2`` plus a second Gaussian at angle ``pi (1 - t / 2)``; the two
      meet at (0, 0.9) when ``t = 1``.
    * ``M4``: indicator of the ring ``0.07 + t/2 < |x| < 0.1 + t/2``.
    """
    x = np.asarray(x, dtype=float)
    which = which.upper()
    if which == "M1":
        return _gauss(x, 0.1 + t, 0.1 + t)
    a2 = 0.5 * np.pi * t
    m2 = _gauss(x, 0.9 * np.cos(a2), 0.9 * np.sin(a2))
    if which == "M2":
        return m2
    if which == "M3":
        a3 = np.pi * (1.0 - 0.5 * t)
        return _gauss(x, 0.9 * np.cos(a3), 0.9 * np.sin(a3)) + m2
    if which == "M4":
        r = np.hypot(x[..., 0], x[..., 1])
        return ((0.07 + t / 2 < r) & (r < 0.1 + t / 2)).astype(float)
    raise ValueError(f"unknown monitor {which!r}")


def write_snapshot(path, grid: Grid, values=None, names=()) -> Path:
    """Check the grid is a regular structured mesh, then write it."""
    check_grid(grid)
    return fields.write_snapshot(path, grid, values, names)


@dataclass
class GenericResult:
    snapshots: list[tuple[str, float, Grid]] = field(default_factory=list)
    cell_counts: list[int] = field(default_factory=list)
    refined_counts: list[int] = field(default_factory=list)

    def grid(self, label: str) -> Grid:
        for lab, _, g in self.snapshots:
            if lab == label:
                return g
        raise KeyError(label)


def _default_times(experiment: str, t_end: float) -> tuple[float, ...]:
    if experiment == "generic-m1":
        return (t_end / 2, t_end)
    return tuple(t_end * i / 3 for i in range(4))


def run_generic(config: ExperimentConfig, matrix=None) -> GenericResult:
    """Drive the mesh with an analytic monitor sampled at cell centres.

    ``generic-m1`` only refines during the sweep and then applies
    ``coarsen_passes`` standalone weak coarsenings at the final time. The other
    experiments refine strongly and coarsen weakly at every step.
    """
    matrix = matrix or build_matrix(config.bounds)
    which = "M" + config.experiment.rsplit("m", 1)[1]
    grid = Grid.uniform(matrix)
    thresholds = config.thresholds
    out = Path(config.out_dir) if config.out_dir else None
    result = GenericResult()
    wanted = config.snapshot_times(_default_times(config.experiment, config.t_end))
    n_steps = int(round(config.t_end / config.dt))
    step_of = {int(round(t / config.dt)): t for t in wanted}

    def monitor(g, t):
        centers = g.centers
        if matrix.d == 1:
            centers = np.column_stack([centers[:, 0], centers[:, 0]])
        return monitor_value(which, centers, t)

    def emit(label, t, g):
        result.snapshots.append((label, t, g))
        if out is not None:
            write_snapshot(out / f"{config.experiment}_{len(result.snapshots) - 1:04d}.csv",
                           g, monitor(g, t), ("monitor",))

    for n in range(n_steps + 1):
        t = n * config.dt
        values = monitor(grid, t)
        if config.experiment == "generic-m1":
            marks = mark(grid, values, thresholds)
            grid, refined = strong_refine(grid, marks.refine)
            check_grid(grid)
        else:
            upd = mesh_update(grid, values, thresholds)
            grid, refined = upd.grid, upd.refined
        result.cell_counts.append(len(grid))
        result.refined_counts.append(int(np.count_nonzero(grid.levels > matrix.bounds.l_min)))
        if n in step_of:
            emit(f"t={step_of[n]:g}", t, grid)
        log.debug("t=%.3f cells=%d refined=%d", t, len(grid), refined.size)

    if config.experiment == "generic-m1":
        t = n_steps * config.dt
        for k in range(1, config.coarsen_passes + 1):
            marks = mark(grid, monitor(grid, t), thresholds)
            grid, _ = weak_coarsen(grid, marks.coarsen)
            check_grid(grid)
            emit(f"coarsen={k}", t, grid)
    return result
