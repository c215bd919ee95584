"""Grids as sets of matrix lines, siblings, and neighbour search."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InconsistentGridError, NoMotherError
from .matrix import MeshMatrix, join_index

__all__ = [
    "Direction",
    "Grid",
    "Interfaces",
    "siblings",
    "sibling_position",
    "same_level_neighbor",
    "neighbors_in_grid",
    "interfaces",
    "check_grid",
    "tiling_sum",
]


class Direction(Enum):
    W = (0, -1)
    E = (0, 1)
    S = (1, -1)
    N = (1, 1)

    @property
    def axis(self) -> int:
        return self.value[0]

    @property
    def sign(self) -> int:
        return self.value[1]

    @property
    def opposite(self) -> "Direction":
        return _OPPOSITE[self]

    @classmethod
    def for_dimension(cls, d: int) -> tuple["Direction", ...]:
        return (cls.W, cls.E) if d == 1 else (cls.W, cls.E, cls.S, cls.N)


_OPPOSITE = {
    Direction.W: Direction.E,
    Direction.E: Direction.W,
    Direction.S: Direction.N,
    Direction.N: Direction.S,
}

# Daughter columns lying against the face through which a search enters a cell.
# Searching E means the neighbour lies east, so its west daughters face us.
_FACING = {
    1: {Direction.E: (0,), Direction.W: (1,)},
    2: {
        Direction.E: (0, 2),  # NW, SW
        Direction.W: (1, 3),  # NE, SE
        Direction.N: (2, 3),  # SW, SE
        Direction.S: (0, 1),  # NW, NE
    },
}


class Grid:
    """An ordered set of matrix lines forming a mesh of ``[0, 1]**d``.

    Membership is answered in O(1) through a position table covering every
    matrix line (``-1`` for lines not in the grid).
    """

    def __init__(self, matrix: MeshMatrix, cells):
        self.matrix = matrix
        cells = np.array(cells, dtype=np.int64).ravel()
        if cells.size and (cells.min() < 1 or cells.max() > matrix.n_lines):
            raise IndexError("grid contains lines outside the matrix")
        position = np.full(matrix.n_lines + 1, -1, dtype=np.int64)
        position[cells] = np.arange(cells.size)
        if np.count_nonzero(position >= 0) != cells.size:
            raise InconsistentGridError("grid contains duplicate lines")
        cells.setflags(write=False)
        position.setflags(write=False)
        self.cells = cells
        self.position = position

    @classmethod
    def uniform(cls, matrix: MeshMatrix, level: int | None = None) -> "Grid":
        b = matrix.bounds
        level = b.l_min if level is None else level
        first = matrix.line_of(level, 1)
        return cls(matrix, np.arange(first, first + b.level_size(level)))

    @property
    def bounds(self):
        return self.matrix.bounds

    def __len__(self):
        return self.cells.size

    def __iter__(self):
        return iter(int(c) for c in self.cells)

    def __contains__(self, line) -> bool:
        line = int(line)
        return 0 < line <= self.matrix.n_lines and self.position[line] >= 0

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.matrix is other.matrix and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"Grid({len(self)} cells, levels {self.levels.min()}..{self.levels.max()})"

    def same_cells(self, other: "Grid") -> bool:
        """Set equality, ignoring order."""
        return len(self) == len(other) and bool(np.all(other.position[self.cells] >= 0))

    def index_of(self, lines) -> np.ndarray:
        return self.position[np.asarray(lines, dtype=np.int64)]

    @property
    def levels(self) -> np.ndarray:
        return self.matrix.level[self.cells]

    @property
    def centers(self) -> np.ndarray:
        return self.matrix.centers(self.cells)

    @property
    def sizes(self) -> np.ndarray:
        return self.matrix.sizes(self.cells)

    @property
    def volumes(self) -> np.ndarray:
        return self.sizes**self.matrix.d

    def level_counts(self) -> dict[int, int]:
        lv, n = np.unique(self.levels, return_counts=True)
        return {int(a): int(b) for a, b in zip(lv, n)}


def siblings(matrix: MeshMatrix, line: int) -> tuple[int, ...]:
    """All daughters of the mother of ``line`` (including ``line``)."""
    mother = matrix.mother_of(line)
    if mother is None:
        raise NoMotherError(f"line {line} lies on the coarsest level and has no mother")
    return matrix.daughters_of(mother)


def sibling_position(matrix: MeshMatrix, line: int) -> tuple[str, str]:
    """Position ``('W'|'E', 'S'|'N')`` of a 2D cell within its sibling group."""
    if matrix.d != 2:
        raise ValueError("sibling positions are defined for d = 2")
    if matrix.mother_of(line) is None:
        raise NoMotherError(f"line {line} lies on the coarsest level and has no mother")
    k1, k2 = (int(v) for v in matrix.axis_index[line])
    return ("W" if k1 % 2 else "E", "S" if k2 % 2 else "N")


def _shift(matrix: MeshMatrix, lines, axis: int, sign: int) -> np.ndarray:
    """Same-level neighbour lines in one direction; 0 where the step leaves the domain."""
    lines = np.asarray(lines, dtype=np.int64)
    lv = matrix.level[lines]
    idx = matrix.axis_index[lines].copy()
    idx[..., axis] += sign
    inside = (idx[..., axis] >= 1) & (idx[..., axis] <= np.left_shift(1, lv))
    k = join_index([idx[..., a] for a in range(matrix.d)], lv)
    out = matrix.offsets[lv - matrix.bounds.l_min] + k
    return np.where(inside, out, 0)


def same_level_neighbor(matrix: MeshMatrix, line: int, direction: Direction) -> int | None:
    """Neighbour on the uniform grid of the same level, or ``None`` at the boundary."""
    axis, sign = direction.value
    if axis >= matrix.d:
        raise ValueError(f"direction {direction.name} undefined for d = {matrix.d}")
    level = int(matrix.level[line])
    i = int(matrix.axis_index[line, axis]) + sign
    if i < 1 or i > 1 << level:
        return None
    # one step along x moves k by 1, along y by a full row of 2**level cells
    return line + sign * (1 << (level * axis))


def neighbors_in_grid(matrix: MeshMatrix, grid: Grid, line: int) -> list[tuple[int, Direction]]:
    """Neighbours of ``line`` in ``grid``, tagged with the direction seen from ``line``.

    Same-level cells are checked first, then ``m_r`` generations of their
    ancestors, then a breadth-first queue over the descendants facing ``line``.
    """
    if line not in grid:
        raise ValueError(f"line {line} is not part of the grid")
    m_r = matrix.bounds.m_r
    found: list[tuple[int, Direction]] = []
    for direction in Direction.for_dimension(matrix.d):
        nb = same_level_neighbor(matrix, line, direction)
        if nb is None:
            continue
        if nb in grid:
            found.append((nb, direction))
            continue
        anc = nb
        hit = False
        for _ in range(m_r):
            anc = int(matrix.mother[anc])
            if anc == 0:
                break
            if anc in grid:
                found.append((anc, direction))
                hit = True
                break
        if hit:
            continue
        queue = [nb]
        facing = _FACING[matrix.d][direction]
        for _ in range(m_r + 1):
            nxt = []
            for entry in queue:
                if entry in grid:
                    found.append((entry, direction))
                    continue
                ds = matrix.daughters[entry]
                if ds[0] == 0:
                    raise InconsistentGridError(
                        f"no neighbour of line {line} towards {direction.name}"
                    )
                nxt.extend(int(ds[c]) for c in facing)
            queue = nxt
            if not queue:
                break
        if queue:
            raise InconsistentGridError(
                f"neighbour search of line {line} towards {direction.name} "
                f"exceeded {m_r} generations"
            )
    return found


@dataclass(frozen=True)
class Interfaces:
    """All interior interfaces and boundary faces of a grid.

    ``lo[i]``/``hi[i]`` are grid positions of the cells on the negative and
    positive side of interface ``i`` along ``axis[i]``. Each interface is
    listed once. Boundary faces are listed per cell with the outward sign.
    """

    grid: Grid
    lo: np.ndarray
    hi: np.ndarray
    axis: np.ndarray
    boundary_cell: np.ndarray
    boundary_axis: np.ndarray
    boundary_sign: np.ndarray

    def __len__(self):
        return self.lo.size

    @property
    def level_lo(self):
        return self.grid.levels[self.lo]

    @property
    def level_hi(self):
        return self.grid.levels[self.hi]

    def ratios(self) -> tuple[np.ndarray, np.ndarray]:
        """Interface measure over cell volume, seen from ``lo`` and from ``hi``."""
        d = self.grid.matrix.d
        l_lo, l_hi = self.level_lo, self.level_hi
        top = np.maximum(l_lo, l_hi)
        return np.ldexp(1.0, d * l_lo - (d - 1) * top), np.ldexp(1.0, d * l_hi - (d - 1) * top)

    def center_distances(self) -> np.ndarray:
        c = self.grid.centers
        return np.linalg.norm(c[self.hi] - c[self.lo], axis=1)

    def boundary_ratios(self) -> np.ndarray:
        return np.ldexp(1.0, self.grid.levels[self.boundary_cell])


def interfaces(grid: Grid, depth: int | None = None) -> Interfaces:
    """Vectorised interface list.

    Every interface is discovered from its finer (or, for equal levels, its
    W/S) side: the same-level neighbour of a cell is either in the grid, has an
    ancestor in the grid within ``depth`` generations, or is refined, in which
    case the finer cells report the interface themselves.
    """
    m = grid.matrix
    depth = m.bounds.m_r if depth is None else depth
    cells = grid.cells
    pos = grid.position
    lo, hi, axes = [], [], []
    b_cell, b_axis, b_sign = [], [], []
    all_idx = np.arange(cells.size)
    for axis in range(m.d):
        for sign in (-1, 1):
            nb = _shift(m, cells, axis, sign)
            edge = nb == 0
            b_cell.append(all_idx[edge])
            b_axis.append(np.full(int(edge.sum()), axis))
            b_sign.append(np.full(int(edge.sum()), sign))
            idx = all_idx[~edge]
            cand = nb[~edge]
            for gen in range(depth + 1):
                p = pos[cand]
                hit = p >= 0
                if gen > 0 or sign > 0:
                    mine, theirs = idx[hit], p[hit]
                    if sign > 0:
                        lo.append(mine)
                        hi.append(theirs)
                    else:
                        lo.append(theirs)
                        hi.append(mine)
                    axes.append(np.full(mine.size, axis))
                keep = ~hit
                idx, cand = idx[keep], m.mother[cand[keep]]
                alive = cand != 0
                idx, cand = idx[alive], cand[alive]
                if not idx.size:
                    break
    cat = lambda xs: np.concatenate(xs).astype(np.int64) if xs else np.zeros(0, np.int64)
    return Interfaces(
        grid, cat(lo), cat(hi), cat(axes), cat(b_cell), cat(b_axis), cat(b_sign)
    )


def tiling_sum(grid: Grid) -> float:
    """Total volume ``sum 2**(-d L)``; equals 1 for a tiling."""
    return float(np.sum(np.ldexp(1.0, -grid.matrix.d * grid.levels)))


def check_grid(grid: Grid) -> None:
    """Raise :class:`InconsistentGridError` unless ``grid`` is a regular structured mesh."""
    m = grid.matrix
    b = m.bounds
    lv = grid.levels
    if lv.size == 0:
        raise InconsistentGridError("empty grid")
    # exact integer volume count on the finest level
    weights = np.left_shift(np.int64(1), b.d * (b.l_max - lv))
    if int(weights.sum()) != b.level_size(b.l_max):
        raise InconsistentGridError(f"cells do not tile the domain (volume {tiling_sum(grid)!r})")
    anc = grid.cells.copy()
    for _ in range(b.l_max - b.l_min):
        anc = m.mother[anc]
        if np.any(grid.position[anc] >= 0):
            raise InconsistentGridError("grid contains an ancestor/descendant pair")
    ifc = interfaces(grid, depth=b.l_max - b.l_min)
    jump = np.abs(ifc.level_lo - ifc.level_hi)
    if jump.size and jump.max() > b.m_r:
        i = int(np.argmax(jump))
        raise InconsistentGridError(
            f"regularity violated between lines {grid.cells[ifc.lo[i]]} and "
            f"{grid.cells[ifc.hi[i]]} (level jump {jump[i]} > m_r={b.m_r})"
        )
