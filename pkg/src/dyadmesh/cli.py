"""Command line entry point: ``dyadmesh {generic,euler,cancer,inspect}``.

Exit status is 0 on success, 1 for configuration errors and 2 for numerical
failures of a solver.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .cancer import CancerConfig, error_table, run_invasion
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .errors import NumericalError
from .euler import EulerConfig, run_explosion
from .experiments import run_generic
from .matrix import RefinementBounds, entry_count_and_memory, total_lines

log = logging.getLogger("dyadmesh")

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--lmin", dest="l_min", type=int)
    p.add_argument("--lmax", dest="l_max", type=int)
    p.add_argument("--mr", dest="m_r", type=int)
    p.add_argument("--theta-refine", type=float)
    p.add_argument("--theta-coarsen", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--snapshot-every", type=float)
    p.add_argument("--out-dir")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadmesh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generic", help="synthetic moving-monitor mesh experiments")
    g.add_argument("--experiment", choices=["m1", "m2", "m3", "m4"], default="m1")
    g.add_argument("--dt", type=float)
    g.add_argument("--coarsen-passes", type=int)
    _common(g)

    e = sub.add_parser("euler", help="2D Euler explosion on an adaptive mesh")
    e.add_argument("--cfl", type=float)
    _common(e)

    c = sub.add_parser("cancer", help="2D cancer invasion on an adaptive mesh")
    c.add_argument("--experiment", dest="variant",
                   choices=["uniform", "heterogeneous", "error-table"])
    c.add_argument("--cfl", type=float)
    c.add_argument("--ecm-raster")
    c.add_argument("--seed", type=int)
    _common(c)

    i = sub.add_parser("inspect", help="matrix size and memory accounting")
    i.add_argument("--d", type=int, default=2)
    i.add_argument("--lmin", dest="l_min", type=int, default=4)
    i.add_argument("--lmax", dest="l_max", type=int, default=10)
    return parser


def _config(args, experiment: str) -> ExperimentConfig:
    keys = ("l_min", "l_max", "m_r", "theta_refine", "theta_coarsen", "t_end",
            "snapshot_every", "out_dir", "dt", "cfl", "coarsen_passes", "variant",
            "ecm_raster", "seed")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides["experiment"] = experiment
    if args.config:
        return load_config(args.config, **overrides)
    return parse_config("", **overrides)


def _generic(cfg: ExperimentConfig):
    result = run_generic(cfg)
    for label, t, grid in result.snapshots:
        print(f"{label:>12s}  cells={len(grid):6d}  levels={grid.level_counts()}")


def _euler(cfg: ExperimentConfig):
    ecfg = EulerConfig(cfl=cfg.cfl, l_min=cfg.l_min, l_max=cfg.l_max, m_r=cfg.m_r,
                       theta_refine=cfg.theta_refine, theta_coarsen=cfg.theta_coarsen,
                       t_end=cfg.t_end, snapshot_times=cfg.snapshot_times((0.0, cfg.t_end / 2)))
    result = run_explosion(ecfg, out_dir=cfg.out_dir)
    for t, f in result.snapshots:
        print(f"t={t:.4f}  cells={len(f.grid):6d}  levels={f.grid.level_counts()}")


def _cancer(cfg: ExperimentConfig):
    base = dict(l_min=cfg.l_min, l_max=cfg.l_max, m_r=cfg.m_r, cfl=cfg.cfl,
                theta_refine=cfg.theta_refine, theta_coarsen=cfg.theta_coarsen)
    if cfg.variant == "error-table":
        rows = error_table(CancerConfig(**base))
        for name, cells, err in rows:
            print(f"{name:28s} {cells:6d}  {err:.4e}")
        if cfg.out_dir:
            path = Path(cfg.out_dir) / "error_table.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["setting", "cells", "l1_error"])
                w.writerows((n, c, repr(e)) for n, c, e in rows)
        return
    defaults = (0.0, 2.5, 5.0) if cfg.variant == "uniform" else (0.0, 1.0, 4.0)
    ccfg = CancerConfig(experiment=cfg.variant, t_end=cfg.t_end,
                        snapshot_times=cfg.snapshot_times(defaults),
                        ecm_raster=cfg.ecm_raster, seed=cfg.seed, **base)
    result = run_invasion(ccfg, out_dir=cfg.out_dir)
    for t, f in result.snapshots:
        print(f"t={t:.4f}  cells={len(f.grid):6d}  levels={f.grid.level_counts()}")


def _inspect(args):
    bounds = RefinementBounds(args.d, args.l_min, args.l_max)
    print(f"d={bounds.d} l_min={bounds.l_min} l_max={bounds.l_max} lines={total_lines(bounds)}")
    for layout in ("full", "no-edge-columns", "no-kl-columns"):
        entries, nbytes = entry_count_and_memory(bounds, layout)
        print(f"{layout:16s} entries={entries:12d} bytes={nbytes:12d} (~{nbytes / 1e6:.2f} MB)")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect":
            _inspect(args)
            return 0
        if args.command == "generic":
            cfg = _config(args, f"generic-{args.experiment}")
            _generic(cfg)
        elif args.command == "euler":
            _euler(_config(args, "euler"))
        else:
            _cancer(_config(args, "cancer"))
    except (ConfigError, ValueError, OSError) as exc:
        print(f"dyadmesh: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"dyadmesh: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
