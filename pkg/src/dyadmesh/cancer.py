"""
Haptotaxis-diffusion-reaction model of cancer invasion on adaptive dyadic meshes.

Unknowns per cell are ``(c, v, m)``: cancer cell density, extracellular matrix
(ECM) density and matrix-degrading enzyme (MMP) concentration::

    c_t = D_c lap(c) - div(chi c grad v) + mu c (1 - c)
    v_t = -delta v m
    m_t = D_m lap(m) + alpha c - beta m

with zero-flux walls. Interface gradients are difference quotients between
cell centres; the haptotactic transport is upwinded on the sign of
``chi * dv/dn``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

from .adaptation import Thresholds, gradient_monitor, mesh_update
from .errors import InstabilityError
from .fields import Field, l1_distance, transfer, write_snapshot
from .matrix import RefinementBounds, build_matrix
from .topology import Direction, Grid, Interfaces, interfaces

log = logging.getLogger(__name__)

__all__ = [
    "CancerParams",
    "CancerConfig",
    "InvasionResult",
    "cancer_source",
    "cancer_flux",
    "cancer_step",
    "cancer_monitor",
    "tumour_region",
    "initial_condition",
    "EcmRaster",
    "default_ecm_raster",
    "run_invasion",
    "error_table",
]

COMPONENTS = ("c", "v", "m")
TUMOUR_STATE = (1.0, 0.0, 0.3)


@dataclass(frozen=True)
class CancerParams:
    chi: float = 2e-2
    D_c: float = 2e-4
    D_m: float = 1e-3
    mu: float = 0.5
    delta: float = 4.0
    alpha: float = 0.5
    beta: float = 0.3

    def __post_init__(self):
        for name in ("chi", "D_c", "D_m", "mu", "delta", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.D_c <= 0 or self.D_m <= 0:
            raise ValueError("diffusion coefficients must be positive")


def cancer_source(U, params: CancerParams = CancerParams()) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    c, v, m = np.moveaxis(U, -1, 0)
    p = params
    return np.stack([p.mu * c * (1.0 - c), -p.delta * v * m, p.alpha * c - p.beta * m], axis=-1)


def _flux_pos(Ui, Uj, dist, params):
    """Flux from ``i`` to ``j`` across a face whose normal points from i to j."""
    grad = (Uj - Ui) / dist[..., None]
    drift = params.chi * grad[..., 1]
    up = np.maximum(drift, 0.0)
    down = -np.minimum(drift, 0.0)
    H = np.zeros(np.broadcast_shapes(Ui.shape, Uj.shape))
    H[..., 0] = -params.D_c * grad[..., 0] + up * Ui[..., 0] - down * Uj[..., 0]
    H[..., 2] = -params.D_m * grad[..., 2]
    return H


def cancer_flux(U_i, U_j, normal: Direction, distance, params: CancerParams = CancerParams()):
    """Combined diffusion and haptotaxis flux out of cell ``i`` towards ``j``.

    ``distance`` is the distance between the two cell centres. For normals
    opposite to the coordinate axes the flux is the negated flux seen from
    ``j``, which keeps the scheme conservative.
    """
    U_i = np.asarray(U_i, dtype=float)
    U_j = np.asarray(U_j, dtype=float)
    dist = np.asarray(distance, dtype=float)
    if np.any(dist <= 0):
        raise ValueError("cell centres coincide")
    if normal.sign > 0:
        return _flux_pos(U_i, U_j, dist, params)
    return -_flux_pos(U_j, U_i, dist, params)


@dataclass
class CancerConfig:
    experiment: str = "uniform"
    l_min: int = 5
    l_max: int = 7
    m_r: int = 1
    theta_refine: float = 0.2
    theta_coarsen: float = 0.1
    cfl: float = 0.5
    t_end: float | None = None
    snapshot_times: tuple[float, ...] | None = None
    adaptive: bool = True
    start_level: int | None = None
    initial_adapt: bool = True
    params: CancerParams = field(default_factory=CancerParams)
    ecm_raster: str | None = None
    blowup: float = 1e6
    subsamples: int = 16
    seed: int = 2016

    def __post_init__(self):
        if self.experiment not in ("uniform", "heterogeneous"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.snapshot_times is None:
            self.snapshot_times = (0.0, 2.5, 5.0) if self.experiment == "uniform" else (0.0, 1.0, 4.0)
            if self.t_end is not None:
                self.snapshot_times = tuple(t for t in self.snapshot_times if t < self.t_end) + (self.t_end,)
        self.snapshot_times = tuple(sorted(set(float(t) for t in self.snapshot_times)))
        if self.t_end is None:
            self.t_end = self.snapshot_times[-1]
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    @property
    def bounds(self) -> RefinementBounds:
        return RefinementBounds(2, self.l_min, self.l_max, self.m_r)

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.theta_refine, self.theta_coarsen)


def stable_dt(grid: Grid, U, params: CancerParams, cfl: float, ifc: Interfaces | None = None) -> float:
    """``cfl * min(h**2 / (4 max D), h / (chi |grad v|))`` over all cells."""
    ifc = interfaces(grid) if ifc is None else ifc
    h = grid.sizes
    bound = h * h / (4.0 * max(params.D_c, params.D_m))
    if params.chi > 0 and len(ifc):
        speed = params.chi * np.abs(U[ifc.hi, 1] - U[ifc.lo, 1]) / ifc.center_distances()
        cell_speed = np.zeros(len(grid))
        np.maximum.at(cell_speed, ifc.lo, speed)
        np.maximum.at(cell_speed, ifc.hi, speed)
        moving = cell_speed > 0
        bound[moving] = np.minimum(bound[moving], h[moving] / cell_speed[moving])
    return float(cfl * bound.min())


def flux_divergence(grid: Grid, U, params: CancerParams, ifc: Interfaces | None = None) -> np.ndarray:
    """``-sum_j ratio_ij H_ij`` per cell; walls carry no flux."""
    ifc = interfaces(grid) if ifc is None else ifc
    H = _flux_pos(U[ifc.lo], U[ifc.hi], ifc.center_distances(), params)
    r_lo, r_hi = ifc.ratios()
    out = np.zeros_like(U)
    for j in (0, 2):
        out[:, j] -= np.bincount(ifc.lo, weights=r_lo * H[:, j], minlength=len(grid))
        out[:, j] += np.bincount(ifc.hi, weights=r_hi * H[:, j], minlength=len(grid))
    return out


def cancer_step(grid: Grid, U, params: CancerParams = CancerParams(), cfl: float = 0.5,
                dt: float | None = None, blowup: float = 1e6, ifc: Interfaces | None = None):
    """Explicit update ``U + dt (S(U) - sum ratio H)``. Returns ``(U_new, dt)``."""
    U = np.asarray(U, dtype=float)
    ifc = interfaces(grid) if ifc is None else ifc
    max_dt = stable_dt(grid, U, params, cfl, ifc)
    dt = max_dt if dt is None else min(dt, max_dt)
    U_new = U + dt * (cancer_source(U, params) + flux_divergence(grid, U, params, ifc))
    bad = ~np.isfinite(U_new) | (np.abs(U_new) > blowup)
    if bad.any():
        i = int(np.flatnonzero(bad.any(axis=1))[0])
        raise InstabilityError(
            f"solution exceeded {blowup:g} in cell line {grid.cells[i]}", cell=int(grid.cells[i])
        )
    return U_new, dt


def cancer_monitor(grid: Grid, U, ifc: Interfaces | None = None) -> np.ndarray:
    return gradient_monitor(grid, np.asarray(U)[:, 0], ifc)


def tumour_region(x, y) -> np.ndarray:
    """Indicator of the initial tumour, the strip above a gently curved line."""
    x = np.asarray(x, dtype=float)
    return y >= np.sin(x**3 / 125.0 + (2.0 * x + 26.0) / 25.0 + 1.0 / 20.0)


class EcmRaster:
    """Grayscale image spanning the unit square; row 0 is the top edge (y = 1).

    Integer-valued or >1 images are read as 8-bit grayscale and divided by 255.
    Sampling is bilinear.
    """

    def __init__(self, pixels):
        pixels = np.asarray(pixels, dtype=float)
        if pixels.ndim != 2 or min(pixels.shape) < 2:
            raise ValueError("ECM raster must be a 2D array of at least 2x2 pixels")
        if pixels.max() > 1.0:
            pixels = pixels / 255.0
        if pixels.min() < 0 or pixels.max() > 1:
            raise ValueError("ECM raster values must map into [0, 1]")
        self.pixels = pixels

    @classmethod
    def load(cls, path) -> "EcmRaster":
        path = Path(path)
        if path.suffix == ".npy":
            return cls(np.load(path))
        return cls(np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None))

    def __call__(self, x, y) -> np.ndarray:
        ny, nx = self.pixels.shape
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        coords = np.stack([(1.0 - y) * ny - 0.5, x * nx - 0.5]).reshape(2, -1)
        out = ndimage.map_coordinates(self.pixels, coords, order=1, mode="nearest")
        return out.reshape(x.shape)


def default_ecm_raster(n: int = 64, bumps: int = 24, seed: int = 2016) -> EcmRaster:
    """Smooth random bumps on a uniform background, scaled to [0, 1]."""
    rng = np.random.default_rng(seed)
    t = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(t, 1.0 - t)
    img = np.full((n, n), 0.5)
    for cx, cy, w, a in zip(rng.uniform(0, 1, bumps), rng.uniform(0, 1, bumps),
                            rng.uniform(0.04, 0.12, bumps), rng.uniform(-1, 1, bumps)):
        img += a * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * w * w))
    img -= img.min()
    img /= img.max()
    return EcmRaster(img)


def initial_condition(kind: str, grid: Grid, ecm: Callable | None = None,
                      subsamples: int = 16) -> np.ndarray:
    """Cell averages of the tumour/ECM initial state.

    ``kind`` is ``"uniform-ecm"`` (``v_0 = 1``) or ``"heterogeneous-ecm"``, in
    which case ``ecm(x, y)`` gives ``v_0`` (default: :func:`default_ecm_raster`).
    Cells crossing the tumour boundary are mixed by the subsampled area fraction.
    """
    if kind not in ("uniform-ecm", "heterogeneous-ecm"):
        raise ValueError(f"unknown initial condition {kind!r}")
    centers = grid.centers
    h = grid.sizes
    off = (2 * np.arange(subsamples) + 1) / (2 * subsamples) - 0.5
    ox, oy = np.meshgrid(off, off, indexing="ij")
    x = centers[:, 0, None] + h[:, None] * ox.ravel()
    y = centers[:, 1, None] + h[:, None] * oy.ravel()
    inside = tumour_region(x, y)
    frac = inside.mean(axis=1)
    U = np.zeros((len(grid), 3))
    U[:, 0] = frac * TUMOUR_STATE[0]
    U[:, 2] = frac * TUMOUR_STATE[2]
    if kind == "uniform-ecm":
        U[:, 1] = 1.0 - frac
    else:
        ecm = default_ecm_raster() if ecm is None else ecm
        v0 = np.asarray(ecm(x, y), dtype=float)
        U[:, 1] = np.where(inside, 0.0, v0).mean(axis=1)
    return U


@dataclass
class InvasionResult:
    snapshots: list[tuple[float, Field]] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    cell_counts: list[int] = field(default_factory=list)
    refined_counts: list[int] = field(default_factory=list)

    @property
    def final(self) -> Field:
        return self.snapshots[-1][1]

    def at(self, t: float) -> Field:
        for ts, f in self.snapshots:
            if ts == t:
                return f
        raise KeyError(t)


def run_invasion(config: CancerConfig | None = None, out_dir=None, matrix=None) -> InvasionResult:
    """Run one invasion experiment, returning snapshots at the configured times."""
    config = config or CancerConfig()
    matrix = matrix or build_matrix(config.bounds)
    params = config.params
    kind = "uniform-ecm" if config.experiment == "uniform" else "heterogeneous-ecm"
    ecm = None
    if kind == "heterogeneous-ecm":
        ecm = EcmRaster.load(config.ecm_raster) if config.ecm_raster else default_ecm_raster(seed=config.seed)
    start = config.l_min if config.start_level is None else config.start_level
    grid = Grid.uniform(matrix, start)
    U = initial_condition(kind, grid, ecm, config.subsamples)
    thresholds = config.thresholds
    if config.adaptive and config.initial_adapt:
        for _ in range(config.l_max - config.l_min):
            upd = mesh_update(grid, cancer_monitor(grid, U), thresholds)
            if upd.grid.same_cells(grid):
                break
            grid = upd.grid
            U = initial_condition(kind, grid, ecm, config.subsamples)

    result = InvasionResult()
    pending = [t for t in config.snapshot_times if t <= config.t_end]
    t = 0.0

    def emit():
        idx = len(result.snapshots)
        result.snapshots.append((t, Field(grid, U.copy(), COMPONENTS)))
        if out_dir is not None:
            write_snapshot(Path(out_dir) / f"cancer_{idx:04d}.csv", grid, U, COMPONENTS)

    while pending and pending[0] <= t:
        emit()
        pending.pop(0)
    while pending:
        ifc = interfaces(grid)
        U, dt = cancer_step(grid, U, params, config.cfl, pending[0] - t, config.blowup, ifc)
        t = pending[0] if dt == pending[0] - t else t + dt
        result.times.append(t)
        if config.adaptive:
            upd = mesh_update(grid, cancer_monitor(grid, U, ifc), thresholds)
            U = transfer(Field(grid, U), upd.grid).values
            grid = upd.grid
        result.cell_counts.append(len(grid))
        result.refined_counts.append(int(np.count_nonzero(grid.levels > config.l_min)))
        while pending and pending[0] <= t:
            emit()
            pending.pop(0)
        log.debug("t=%.4f dt=%.3e cells=%d", t, dt, len(grid))
    return result


def error_table(config: CancerConfig | None = None, t_report: float = 2.5):
    """L1 differences of ``c`` from the uniform finest-level run at ``t_report``.

    Returns rows ``(setting, cells, l1_error)`` for uniform ``l_min``, uniform
    ``l_min + 1`` and the adaptive run.
    """
    base = config or CancerConfig()
    matrix = build_matrix(base.bounds)

    def run(**kw):
        cfg = CancerConfig(**{**base.__dict__, "t_end": t_report,
                              "snapshot_times": (t_report,), **kw})
        return run_invasion(cfg, matrix=matrix).at(t_report)

    reference = run(adaptive=False, start_level=base.l_max)
    rows = []
    settings = [(f"uniform, l={lv}", dict(adaptive=False, start_level=lv))
                for lv in range(base.l_min, base.l_max)]
    levels = ",".join(str(lv) for lv in range(base.l_min, base.l_max + 1))
    settings.append((f"adaptive, l in {{{levels}}}", dict(adaptive=True)))
    for name, kw in settings:
        f = run(**kw)
        err = float(l1_distance(f, reference)[0])
        rows.append((name, len(f.grid), err))
        log.info("%s: %d cells, L1 error %.4e", name, len(f.grid), err)
    return rows
