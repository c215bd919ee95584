"""Finite-volume cell averages on grids and their transfer between nested grids."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import GridMismatchError
from .topology import Grid

__all__ = [
    "Field",
    "integrate",
    "project_down",
    "project_up",
    "transfer",
    "common_coarsening",
    "l1_distance",
    "write_snapshot",
    "read_snapshot",
]


@dataclass
class Field:
    """Per-cell averages ``values[i, j]`` of component ``j`` on ``grid.cells[i]``."""

    grid: Grid
    values: np.ndarray
    names: tuple[str, ...] = dc_field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != len(self.grid):
            raise ValueError(
                f"values of shape {values.shape} do not match a grid of {len(self.grid)} cells"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.values = values
        if not self.names:
            self.names = tuple(f"u{j}" for j in range(values.shape[1]))
        elif len(self.names) != values.shape[1]:
            raise ValueError("one name per component required")
        self.names = tuple(self.names)

    @property
    def components(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.names)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.names)


def integrate(field: Field) -> np.ndarray:
    """Integral of each component over the unit domain."""
    return field.grid.volumes @ field.values


def _ancestor_in(grid: Grid, lines: np.ndarray, max_up: int):
    """Grid position of the ancestor-or-self of each line in ``grid`` (-1 if none)."""
    m = grid.matrix
    anc = lines.copy()
    pos = grid.position[anc]
    todo = np.flatnonzero(pos < 0)
    for _ in range(max_up):
        if not todo.size:
            break
        anc[todo] = m.mother[anc[todo]]
        pos[todo] = grid.position[anc[todo]]
        todo = todo[(pos[todo] < 0) & (anc[todo] != 0)]
    return pos, anc


def _transfer(values: np.ndarray, src: Grid, dst: Grid, up: bool, down: bool) -> np.ndarray:
    if src.matrix is not dst.matrix:
        raise GridMismatchError("grids refer to different mesh matrices")
    m = src.matrix
    span = m.bounds.l_max - m.bounds.l_min
    out = np.zeros((len(dst), values.shape[1]))

    # targets equal to or inside a source cell: injection
    pos, anc = _ancestor_in(src, dst.cells, span)
    hit = pos >= 0
    if not up and np.any(anc[hit] != dst.cells[hit]):
        raise GridMismatchError("target grid refines the source grid")
    out[hit] = values[pos[hit]]

    # targets covering several source cells: volume-weighted average
    need = ~hit
    if need.any():
        if not down:
            raise GridMismatchError("target grid coarsens the source grid")
        sub_pos, _ = _ancestor_in(dst, src.cells, span)
        take = np.flatnonzero((sub_pos >= 0) & need[np.maximum(sub_pos, 0)])
        lines, vals = _merge_to(m, src.cells[take], values[take], dst.cells[sub_pos[take]])
        pos = dst.position[lines]
        covered = np.zeros(len(dst), dtype=bool)
        covered[pos] = True
        if np.any(need & ~covered):
            raise GridMismatchError("target cells are not covered by source cells")
        out[pos] = vals
    return out


def _merge_to(m, lines: np.ndarray, vals: np.ndarray, targets: np.ndarray):
    """Average complete sibling groups level by level until each line reaches its target.

    Sibling values are summed pairwise, so equal values average to themselves
    exactly.
    """
    n_ch = m.bounds.n_children
    goal = m.level[targets]
    for top in range(m.bounds.l_max, m.bounds.l_min, -1):
        lv = m.level[lines]
        sel = (lv == top) & (lv > goal)
        if not sel.any():
            continue
        mothers = m.mother[lines[sel]]
        slot = np.argmax(m.daughters[mothers] == lines[sel][:, None], axis=1)
        order = np.lexsort((slot, mothers))
        mothers, group_vals = mothers[order], vals[sel][order]
        if mothers.size % n_ch or np.any(slot[order].reshape(-1, n_ch) != np.arange(n_ch)):
            raise GridMismatchError("target cells are not covered by source cells")
        g = group_vals.reshape(-1, n_ch, vals.shape[1])
        if n_ch == 4:
            merged = ((g[:, 0] + g[:, 1]) + (g[:, 2] + g[:, 3])) * 0.25
        else:
            merged = (g[:, 0] + g[:, 1]) * 0.5
        keep = ~sel
        lines = np.concatenate([lines[keep], mothers[::n_ch]])
        vals = np.concatenate([vals[keep], merged])
        goal = np.concatenate([goal[keep], goal[sel][order][::n_ch]])
    return lines, vals


def project_down(field: Field, target: Grid) -> Field:
    """Exact volume-weighted averages on a coarsening of ``field.grid``."""
    return Field(target, _transfer(field.values, field.grid, target, up=False, down=True), field.names)


def project_up(field: Field, target: Grid) -> Field:
    """Piecewise-constant injection onto a refinement of ``field.grid``."""
    return Field(target, _transfer(field.values, field.grid, target, up=True, down=False), field.names)


def transfer(field: Field, target: Grid) -> Field:
    """Move values to a grid whose cells are each nested with source cells.

    Refined cells inherit their ancestor's value, coarsened cells receive the
    volume-weighted average of their descendants. This covers a mesh update
    (strong refinement followed by weak coarsening) in a single pass.
    """
    return Field(target, _transfer(field.values, field.grid, target, up=True, down=True), field.names)


def common_coarsening(a: Grid, b: Grid) -> Grid:
    """Coarsest grid whose cells are each a cell of ``a`` or of ``b``."""
    if a.matrix is not b.matrix:
        raise GridMismatchError("grids refer to different mesh matrices")
    m = a.matrix
    union = np.union1d(a.cells, b.cells)
    member = np.zeros(m.n_lines + 1, dtype=bool)
    member[union] = True
    covered = np.zeros(union.size, dtype=bool)
    anc = union.copy()
    for _ in range(m.bounds.l_max - m.bounds.l_min):
        anc = m.mother[anc]
        covered |= member[anc] & (anc != 0)
    return Grid(m, union[~covered])


def l1_distance(a: Field, b: Field) -> np.ndarray:
    """Per-component L1 distance, measured on the common coarsening of both grids."""
    if a.components != b.components:
        raise ValueError("fields have different numbers of components")
    coarse = common_coarsening(a.grid, b.grid)
    pa = project_down(a, coarse)
    pb = project_down(b, coarse)
    return coarse.volumes @ np.abs(pa.values - pb.values)


def _row_prefix(grid: Grid) -> list[str]:
    m = grid.matrix
    centers = grid.centers
    sizes = grid.sizes
    levels = grid.levels
    rows = []
    for i, line in enumerate(grid.cells):
        parts = [str(int(line)), str(int(levels[i]))]
        parts.extend(repr(float(c)) for c in centers[i])
        parts.append(repr(float(sizes[i])))
        rows.append(",".join(parts))
    return rows


def write_snapshot(path, grid: Grid, values=None, names=()) -> Path:
    """Write one comma-separated record per cell.

    Columns are ``line, level, center_x[, center_y], size`` followed by one
    column per value component. Grid-only snapshots omit the value columns.
    Output is byte-for-byte deterministic.
    """
    path = Path(path)
    axes = ["center_x", "center_y"][: grid.matrix.d]
    header = ["line", "level", *axes, "size"]
    if values is not None:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != len(grid):
            raise ValueError("values do not match grid")
        names = tuple(names) or tuple(f"u{j}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ValueError("one name per component required")
        header.extend(names)
    rows = _row_prefix(grid)
    if values is not None:
        rows = [r + "," + ",".join(repr(float(v)) for v in values[i]) for i, r in enumerate(rows)]
    text = ",".join(header) + "\n" + "".join(r + "\n" for r in rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write snapshot {path}: {exc.strerror}") from exc
    return path


def read_snapshot(path):
    """Return ``(header, lines, levels, table)`` where ``table`` holds the float columns."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2:]
