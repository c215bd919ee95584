"""
Flat matrix encoding of all dyadic cells between two refinement levels.

Every cell of every uniform grid ``G_l`` with ``l_min <= l <= l_max`` owns one
line of the matrix. A line stores the intra-level index ``k``, the level ``l``,
the line of the mother cell and the lines of the ``2**d`` daughter cells. In 2D
the daughter columns are ordered NW, NE, SW, SE; in 1D they are left, right.

Lines are 1-based. The value 0 is the sentinel for "no mother" (cells on
``l_min``) and "no daughters" (cells on ``l_max``). Internally every per-line
array has a padding slot at index 0 so that lines can be used as array indices
directly.

Within a level, cells are enumerated lexicographically with x varying fastest::

    k = (k_2 - 1) * 2**l + k_1,    1 <= k_1, k_2 <= 2**l

and the cell centre is ``((2 k_1 - 1) / 2**(l+1), (2 k_2 - 1) / 2**(l+1))``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

__all__ = [
    "RefinementBounds",
    "CellGeometry",
    "MeshMatrix",
    "build_matrix",
    "entry_count_and_memory",
    "total_lines",
]

BYTES_PER_ENTRY = 4
_HEADER = struct.Struct("<4I")

Layout = Literal["full", "no-edge-columns", "no-kl-columns"]


@dataclass(frozen=True)
class RefinementBounds:
    """Dimension, level range and mesh regularity of a family of dyadic grids.

    ``l_min == l_max`` is accepted as a degenerate single-level family (used for
    uniform reference runs); adaptation is then a no-op.
    """

    d: int
    l_min: int
    l_max: int
    m_r: int = 1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.l_min < 0 or self.l_max < self.l_min:
            raise ValueError(
                f"need 0 <= l_min <= l_max, got l_min={self.l_min}, l_max={self.l_max}"
            )
        if self.m_r < 1:
            raise ValueError(f"mesh regularity m_r must be >= 1, got {self.m_r}")

    @property
    def n_children(self) -> int:
        return 2**self.d

    @property
    def levels(self) -> range:
        return range(self.l_min, self.l_max + 1)

    def level_size(self, level: int) -> int:
        """Number of cells in the uniform grid of ``level``."""
        return 2 ** (level * self.d)

    def offset(self, level: int) -> int:
        """Number of lines preceding the first line of ``level``."""
        return sum(self.level_size(j) for j in range(self.l_min, level))


def total_lines(bounds: RefinementBounds) -> int:
    return bounds.offset(bounds.l_max + 1)


class CellGeometry(NamedTuple):
    center: tuple[float, ...]
    size: float


def entry_count_and_memory(
    bounds: RefinementBounds, layout: Layout = "full"
) -> tuple[int, int]:
    """Number of stored integers and bytes (4 per entry) for a matrix layout.

    ``full`` stores ``3 + 2**d`` columns on every line. ``no-edge-columns``
    drops the mother entry of the coarsest level and the daughter entries of
    the finest level. ``no-kl-columns`` additionally drops the ``k`` and ``l``
    columns, which can be recomputed from the line number.
    """
    n = total_lines(bounds)
    entries = n * (3 + bounds.n_children)
    if layout == "full":
        pass
    elif layout in ("no-edge-columns", "no-kl-columns"):
        entries -= bounds.level_size(bounds.l_min)
        entries -= bounds.n_children * bounds.level_size(bounds.l_max)
        if layout == "no-kl-columns":
            entries -= 2 * n
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return entries, entries * BYTES_PER_ENTRY


def split_index(k, level, d):
    """Decompose intra-level indices into per-axis indices ``(k_1, ..., k_d)``."""
    k = np.asarray(k, dtype=np.int64)
    level = np.asarray(level, dtype=np.int64)
    n = np.left_shift(1, level)
    rest = k - 1
    parts = []
    for _ in range(d):
        parts.append(rest % n + 1)
        rest = rest // n
    return parts


def join_index(parts, level):
    """Inverse of :func:`split_index`."""
    level = np.asarray(level, dtype=np.int64)
    n = np.left_shift(1, level)
    k = np.zeros_like(np.asarray(parts[0], dtype=np.int64))
    for part in reversed(parts):
        k = k * n + (np.asarray(part, dtype=np.int64) - 1)
    return k + 1


def _daughter_offsets(d):
    # (dx, dy) in {0,1}: 0 = left/south half, 1 = right/north half
    if d == 1:
        return [(0,), (1,)]
    return [(0, 1), (1, 1), (0, 0), (1, 0)]  # NW, NE, SW, SE


class MeshMatrix:
    """Precomputed tree of all cells between ``l_min`` and ``l_max``.

    Attributes
    ----------
    bounds : RefinementBounds
    table : ndarray, shape (n_lines, 3 + 2**d), unsigned
        Columns ``k, l, m, daughters...``; row ``i`` describes line ``i + 1``.
    k, level, mother : ndarray of int64, length n_lines + 1
        Column copies indexed directly by line (slot 0 is padding).
    daughters : ndarray of int64, shape (n_lines + 1, 2**d)
    axis_index : ndarray of int64, shape (n_lines + 1, d)
        Per-axis indices ``k_i`` of each line.
    """

    def __init__(self, bounds: RefinementBounds, table: np.ndarray):
        self.bounds = bounds
        self.table = table
        self.table.setflags(write=False)
        n = table.shape[0]
        pad = np.zeros((1, table.shape[1]), dtype=np.int64)
        full = np.concatenate([pad, table.astype(np.int64)])
        self.k = full[:, 0]
        self.level = full[:, 1]
        self.level[0] = -1
        self.mother = full[:, 2]
        self.daughters = full[:, 3:]
        ax = np.zeros((n + 1, bounds.d), dtype=np.int64)
        ax[1:] = np.stack(split_index(self.k[1:], self.level[1:], bounds.d), axis=1)
        self.axis_index = ax
        self.offsets = np.array(
            [bounds.offset(lv) for lv in range(bounds.l_min, bounds.l_max + 2)],
            dtype=np.int64,
        )
        for arr in (self.k, self.level, self.mother, self.daughters, self.axis_index):
            arr.setflags(write=False)

    @property
    def d(self) -> int:
        return self.bounds.d

    @property
    def n_lines(self) -> int:
        return self.table.shape[0]

    def __len__(self):
        return self.n_lines

    def __repr__(self):
        b = self.bounds
        return f"MeshMatrix(d={b.d}, l_min={b.l_min}, l_max={b.l_max}, lines={self.n_lines})"

    def _check_line(self, line):
        line = np.asarray(line, dtype=np.int64)
        if np.any(line < 1) or np.any(line > self.n_lines):
            raise IndexError(f"line out of range 1..{self.n_lines}: {line}")
        return line

    def line_of(self, level, k):
        """Line of the cell with intra-level index ``k`` on ``level``."""
        level = np.asarray(level, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        b = self.bounds
        if np.any(level < b.l_min) or np.any(level > b.l_max):
            raise IndexError(f"level out of range {b.l_min}..{b.l_max}: {level}")
        if np.any(k < 1) or np.any(k > np.left_shift(1, level * b.d)):
            raise IndexError(f"intra-level index out of range: {k} on level {level}")
        out = self.offsets[level - b.l_min] + k
        return int(out) if out.ndim == 0 else out

    def level_and_index_of(self, line):
        """Recover ``(level, k)`` from a line without reading the k/l columns."""
        line = self._check_line(line)
        i = np.searchsorted(self.offsets, line, side="left") - 1
        level = self.bounds.l_min + i
        k = line - self.offsets[i]
        if line.ndim == 0:
            return int(level), int(k)
        return level, k

    def centers(self, lines) -> np.ndarray:
        """Cell centres, shape ``(n, d)``."""
        lines = np.asarray(lines, dtype=np.int64)
        lv = self.level[lines]
        return (2 * self.axis_index[lines] - 1) / np.ldexp(1.0, lv + 1)[..., None]

    def sizes(self, lines) -> np.ndarray:
        return np.ldexp(1.0, -self.level[np.asarray(lines, dtype=np.int64)])

    def geometry(self, line: int) -> CellGeometry:
        line = int(self._check_line(line))
        return CellGeometry(tuple(float(c) for c in self.centers(line)), float(self.sizes(line)))

    def mother_of(self, line: int) -> int | None:
        m = int(self.mother[self._check_line(line)])
        return m or None

    def daughters_of(self, line: int) -> tuple[int, ...] | None:
        ds = self.daughters[self._check_line(line)]
        return tuple(int(x) for x in ds) if ds[0] else None

    def ancestor(self, lines, generations: int):
        """Ancestor ``generations`` levels up (0 where it would leave ``l_min``)."""
        out = np.asarray(lines, dtype=np.int64)
        for _ in range(generations):
            out = self.mother[out]
        return out

    def ancestor_at_level(self, lines, level):
        """Ancestor-or-self of each line on ``level`` (must be <= the line's level)."""
        out = np.array(lines, dtype=np.int64, copy=True)
        target = np.broadcast_to(np.asarray(level, dtype=np.int64), out.shape)
        while True:
            up = self.level[out] > target
            if not up.any():
                return out
            out[up] = self.mother[out[up]]

    # -- binary cache ------------------------------------------------------

    def dump(self, path) -> None:
        """Write header ``(d, l_min, l_max, lines)`` and row-major u32 LE entries."""
        if self.table.dtype.itemsize > 4:
            raise OverflowError("matrix entries do not fit in 4 bytes")
        b = self.bounds
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(b.d, b.l_min, b.l_max, self.n_lines))
            fh.write(np.ascontiguousarray(self.table, dtype="<u4").tobytes())

    @classmethod
    def load(cls, path, m_r: int = 1) -> "MeshMatrix":
        raw = Path(path).read_bytes()
        d, l_min, l_max, n = _HEADER.unpack_from(raw)
        bounds = RefinementBounds(d, l_min, l_max, m_r)
        if n != total_lines(bounds):
            raise ValueError(f"{path}: header line count {n} does not match bounds")
        cols = 3 + 2**d
        body = np.frombuffer(raw, dtype="<u4", offset=_HEADER.size)
        if body.size != n * cols:
            raise ValueError(f"{path}: truncated matrix body")
        return cls(bounds, body.reshape(n, cols).astype(np.uint32))


def build_matrix(bounds: RefinementBounds) -> MeshMatrix:
    """Populate the matrix level by level."""
    d = bounds.d
    n_lines = total_lines(bounds)
    cols = 3 + bounds.n_children
    if n_lines * cols > np.iinfo(np.intp).max:
        raise OverflowError(f"{n_lines} lines exceed the addressable index range")
    dtype = np.uint32 if n_lines < 2**32 else np.uint64
    table = np.zeros((n_lines, cols), dtype=dtype)
    dau = _daughter_offsets(d)
    for level in bounds.levels:
        off = bounds.offset(level)
        k = np.arange(1, bounds.level_size(level) + 1, dtype=np.int64)
        rows = slice(off, off + k.size)
        table[rows, 0] = k
        table[rows, 1] = level
        parts = split_index(k, level, d)
        if level > bounds.l_min:
            km = join_index([(p + 1) // 2 for p in parts], level - 1)
            table[rows, 2] = bounds.offset(level - 1) + km
        if level < bounds.l_max:
            child_off = bounds.offset(level + 1)
            for col, shift in enumerate(dau):
                kc = join_index([2 * p - 1 + s for p, s in zip(parts, shift)], level + 1)
                table[rows, 3 + col] = child_off + kc
    return MeshMatrix(bounds, table)
