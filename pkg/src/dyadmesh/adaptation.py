"""Monitor-driven marking, strong refinement and weak coarsening."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .topology import Grid, Interfaces, check_grid, interfaces

__all__ = [
    "Thresholds",
    "MarkSets",
    "MeshUpdate",
    "mark",
    "strong_refine",
    "weak_coarsen",
    "mesh_update",
    "gradient_monitor",
]


@dataclass(frozen=True)
class Thresholds:
    refine: float
    coarsen: float

    def __post_init__(self):
        if not (0.0 <= self.coarsen <= 1.0 and 0.0 <= self.refine <= 1.0):
            raise ValueError(f"thresholds must lie in [0, 1]: {self}")
        if self.coarsen > self.refine:
            raise ValueError(
                f"coarsening threshold {self.coarsen} exceeds refinement threshold {self.refine}"
            )


class MarkSets(NamedTuple):
    refine: np.ndarray
    coarsen: np.ndarray


class MeshUpdate(NamedTuple):
    grid: Grid
    refined: np.ndarray
    coarsened: np.ndarray


def mark(grid: Grid, monitor, thresholds: Thresholds) -> MarkSets:
    """Lines whose monitor value strictly exceeds/undercuts the thresholds."""
    monitor = np.asarray(monitor, dtype=float)
    if monitor.shape != (len(grid),):
        raise ValueError(f"monitor has shape {monitor.shape}, grid has {len(grid)} cells")
    b = grid.bounds
    lv = grid.levels
    refine = (monitor > thresholds.refine) & (lv < b.l_max)
    coarsen = (monitor < thresholds.coarsen) & (lv > b.l_min)
    return MarkSets(grid.cells[refine], grid.cells[coarsen])


def _mask(grid: Grid, lines) -> np.ndarray:
    lines = np.asarray(lines, dtype=np.int64).ravel()
    pos = grid.position[lines]
    if np.any(pos < 0):
        raise ValueError("marked lines must belong to the grid")
    out = np.zeros(len(grid), dtype=bool)
    out[pos] = True
    return out


def _jump_pairs(ifc: Interfaces, m_r: int) -> tuple[np.ndarray, np.ndarray]:
    """(fine, coarse) grid positions of interfaces with a level jump of exactly ``m_r``."""
    l_lo, l_hi = ifc.level_lo, ifc.level_hi
    dl = l_lo - l_hi
    sel = np.abs(dl) == m_r
    fine = np.where(dl > 0, ifc.lo, ifc.hi)[sel]
    coarse = np.where(dl > 0, ifc.hi, ifc.lo)[sel]
    return fine, coarse


def strong_refine(grid: Grid, refine_marks, ifc: Interfaces | None = None):
    """Refine the marked cells plus every cell regularity forces along.

    Marked cells are visited from the finest to the coarsest level; a marked
    cell whose neighbour is exactly ``m_r`` levels coarser drags that
    neighbour into the refinement set. Returns ``(new_grid, refined_lines)``.
    """
    m = grid.matrix
    b = m.bounds
    marked = _mask(grid, refine_marks)
    lv = grid.levels
    marked &= lv < b.l_max
    if not marked.any():
        return grid, grid.cells[:0]
    ifc = interfaces(grid) if ifc is None else ifc
    fine, coarse = _jump_pairs(ifc, b.m_r)
    fine_level = lv[fine]
    for level in range(b.l_max, b.l_min - 1, -1):
        sel = (fine_level == level) & marked[fine]
        marked[coarse[sel]] = True
    cells = grid.cells
    n_ch = b.n_children
    counts = np.where(marked, n_ch, 1)
    starts = np.cumsum(counts) - counts
    out = np.empty(int(counts.sum()), dtype=np.int64)
    out[starts[~marked]] = cells[~marked]
    kids = m.daughters[cells[marked]]
    for j in range(n_ch):
        out[starts[marked] + j] = kids[:, j]
    return Grid(m, out), cells[marked]


def weak_coarsen(grid: Grid, coarsen_marks, ifc: Interfaces | None = None):
    """Coarsen complete, fully marked sibling groups that keep the mesh regular.

    Levels are visited from the finest to the coarsest. A marked cell is
    unmarked if one of its neighbours is exactly ``m_r`` levels finer and is
    not itself being coarsened. A sibling group is replaced by its mother only
    if all ``2**d`` siblings are present and still marked. Returns
    ``(new_grid, coarsened_lines)``.
    """
    m = grid.matrix
    b = m.bounds
    marked = _mask(grid, coarsen_marks)
    lv = grid.levels
    marked &= lv > b.l_min
    if not marked.any():
        return grid, grid.cells[:0]
    ifc = interfaces(grid) if ifc is None else ifc
    fine, coarse = _jump_pairs(ifc, b.m_r)
    coarse_level = lv[coarse]
    cells = grid.cells
    n_ch = b.n_children
    coarsened = np.zeros(len(grid), dtype=bool)
    for level in range(b.l_max, b.l_min, -1):
        cand = marked & (lv == level)
        if not cand.any():
            continue
        blocked = coarse[(coarse_level == level) & ~coarsened[fine]]
        cand[blocked] = False
        idx = np.flatnonzero(cand)
        mothers = m.mother[cells[idx]]
        uniq, counts = np.unique(mothers, return_counts=True)
        full = uniq[counts == n_ch]
        coarsened[idx[np.isin(mothers, full)]] = True
    if not coarsened.any():
        return grid, cells[:0]
    keep = np.flatnonzero(~coarsened)
    gone = np.flatnonzero(coarsened)
    mothers, first = np.unique(m.mother[cells[gone]], return_index=True)
    slots = np.concatenate([keep, gone[first]])
    lines = np.concatenate([cells[keep], mothers])
    return Grid(m, lines[np.argsort(slots, kind="stable")]), cells[coarsened]


def mesh_update(grid: Grid, monitor, thresholds: Thresholds, validate: bool = __debug__) -> MeshUpdate:
    """Mark, refine strongly, then coarsen weakly on the refined grid."""
    marks = mark(grid, monitor, thresholds)
    refined_grid, refined = strong_refine(grid, marks.refine)
    survivors = marks.coarsen[~np.isin(marks.coarsen, refined)]
    final, coarsened = weak_coarsen(refined_grid, survivors)
    if validate:
        check_grid(final)
    return MeshUpdate(final, refined, coarsened)


def gradient_monitor(grid: Grid, scalar, ifc: Interfaces | None = None) -> np.ndarray:
    """Largest neighbour difference quotient per cell, scaled to a maximum of 1.

    An identically flat ``scalar`` yields an all-zero monitor.
    """
    scalar = np.asarray(scalar, dtype=float)
    ifc = interfaces(grid) if ifc is None else ifc
    g = np.abs(scalar[ifc.hi] - scalar[ifc.lo]) / ifc.center_distances()
    out = np.zeros(len(grid))
    np.maximum.at(out, ifc.lo, g)
    np.maximum.at(out, ifc.hi, g)
    top = out.max() if out.size else 0.0
    return out / top if top > 0 else out
