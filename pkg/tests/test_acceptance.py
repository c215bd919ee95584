"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""

import contextlib
import time

import numpy as np
import pytest

from dyadmesh import (
    Field,
    Grid,
    RefinementBounds,
    Thresholds,
    build_matrix,
    entry_count_and_memory,
    mesh_update,
    neighbors_in_grid,
    project_down,
    project_up,
    total_lines,
)
from dyadmesh.cancer import CancerConfig, CancerParams, cancer_monitor, cancer_source, cancer_step, error_table
from dyadmesh.cancer import initial_condition
from dyadmesh.config import ExperimentConfig
from dyadmesh.euler import RADIUS, EulerConfig, euler_step, pressure, run_explosion
from dyadmesh.experiments import run_generic
from dyadmesh.fields import integrate, transfer
from dyadmesh.topology import interfaces, tiling_sum

import oracles
from conftest import ACCEPTANCE_LINES, cached_matrix
from test_matrix import EXAMPLE_1D

# reference L1 errors of c at t = 2.5: uniform l=5, uniform l=6, adaptive l in {5,6,7}
REFERENCE_ERRORS = (3.989e-2, 1.451e-2, 1.002e-2)


@contextlib.contextmanager
def criterion(name):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        line = f"FAIL  {name}  ({time.perf_counter() - start:.1f} s): {exc}".splitlines()[0]
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"PASS  {name}  ({time.perf_counter() - start:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_matrix_fidelity():
    with criterion("matrix fidelity"):
        t0 = time.perf_counter()
        m = build_matrix(RefinementBounds(1, 0, 3))
        elapsed = time.perf_counter() - t0
        np.testing.assert_array_equal(m.table, EXAMPLE_1D)
        assert elapsed < 1e-3, f"{elapsed * 1e3:.2f} ms"


def test_memory_accounting():
    with criterion("memory accounting"):
        b1 = RefinementBounds(1, 5, 9)
        e1, bytes1 = entry_count_and_memory(b1)
        assert total_lines(b1) == 992 and e1 == 4960
        b2 = RefinementBounds(2, 4, 10)
        full, full_b = entry_count_and_memory(b2, "full")
        reduced, reduced_b = entry_count_and_memory(b2, "no-edge-columns")
        kl, kl_b = entry_count_and_memory(b2, "no-kl-columns")
        assert full == 9_786_112
        assert full - reduced == 4_194_560
        assert [round(bytes1 / 1e3), round(full_b / 1e6), round(reduced_b / 1e6), round(kl_b / 1e6)] == [20, 39, 22, 11]


def test_neighbour_oracle_500_meshes():
    with criterion("neighbour oracle, 500 random meshes"):
        rng = np.random.default_rng(500)
        t0 = time.perf_counter()
        mismatches = 0
        for _ in range(500):
            l_min = int(rng.integers(3, 6))
            l_max = int(rng.integers(l_min + 1, 7))
            m_r = int(rng.integers(1, 3))
            m = cached_matrix(2, l_min, l_max, m_r)
            g = oracles.random_rsm(m, rng, rounds=int(rng.integers(1, 5)))
            ref = oracles.geometric_neighbors(g)
            mismatches += sum(set(neighbors_in_grid(m, g, c)) != ref[c] for c in g)
        elapsed = time.perf_counter() - t0
        assert mismatches == 0, f"{mismatches} mismatching cells"
        assert elapsed < 60, f"{elapsed:.1f} s"


def test_adaptation_invariants():
    with criterion("adaptation invariants, 200 random monitors"):
        rng = np.random.default_rng(200)
        t0 = time.perf_counter()
        for _ in range(200):
            l_min = int(rng.integers(2, 5))
            l_max = int(rng.integers(l_min + 1, 7))
            m_r = int(rng.integers(1, 3))
            m = cached_matrix(2, l_min, l_max, m_r)
            g = oracles.random_rsm(m, rng, rounds=2)
            th_r = rng.uniform(0.1, 0.9)
            th = Thresholds(th_r, rng.uniform(0.05, th_r))
            for _ in range(2):
                # smooth random bumps plus noise
                c = g.centers
                bump = np.exp(-rng.uniform(20, 200) * np.sum((c - rng.random(2)) ** 2, axis=1))
                g = mesh_update(g, bump + 0.1 * rng.random(len(g)), th).grid
                assert abs(tiling_sum(g) - 1.0) <= 1e-12
                assert oracles.is_tiling(g) and oracles.is_regular(g)
        # and the grids produced by the synthetic experiments
        for exp in ("generic-m2", "generic-m3", "generic-m4"):
            res = run_generic(ExperimentConfig(exp, l_max=6, dt=0.05))
            for _, _, g in res.snapshots:
                assert abs(tiling_sum(g) - 1.0) <= 1e-12 and oracles.is_regular(g)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30, f"{elapsed:.1f} s"


def test_generic_experiment_1():
    with criterion("generic experiment M1"):
        t0 = time.perf_counter()
        res = run_generic(ExperimentConfig("generic-m1"))
        g = res.grid("t=0.8")
        lv, c = g.levels, g.centers
        for s in np.arange(0.1, 0.9001, 0.005):
            inside = np.all(np.abs(c - s) <= g.sizes[:, None] / 2, axis=1)
            assert lv[inside].max() == 7, f"diagonal point {s:.3f} not on level 7"
        off_diag = np.abs(c[lv == 7, 0] - c[lv == 7, 1]) / np.sqrt(2)
        assert off_diag.max() < 0.06, f"level-7 band width {off_diag.max():.3f}"
        final = res.grid("coarsen=2")
        support = np.sqrt(np.log(100.0) / 100.0)
        dist = np.hypot(*(final.centers - 0.9).T)
        assert np.all(final.levels[dist > support] == 5), "refined cells left outside the final support"
        assert oracles.is_regular(final)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30, f"{elapsed:.1f} s"


def test_projection_conservation():
    with criterion("projection conservation, 100 pairs"):
        rng = np.random.default_rng(100)
        m = cached_matrix(2, 2, 6)
        for _ in range(100):
            fine = oracles.random_rsm(m, rng)
            lv = int(rng.integers(2, 6))
            coarse = Grid(m, np.unique(m.ancestor_at_level(fine.cells, np.minimum(fine.levels, lv))))
            f = Field(fine, rng.normal(size=(len(fine), 2)))
            down = project_down(f, coarse)
            scale = np.abs(f.values).T @ fine.volumes
            assert np.all(np.abs(integrate(down) - integrate(f)) <= 1e-12 * scale)
            up = project_up(down, fine)
            assert np.all(np.abs(integrate(up) - integrate(down)) <= 1e-12 * scale)
            np.testing.assert_array_equal(project_down(up, coarse).values, down.values)


def _ray(field):
    """Cells along the +x ray from the centre, ordered outward, as ``(r, level, rho, p)``."""
    g = field.grid
    c, h = g.centers, g.sizes
    on = (c[:, 1] - h / 2 == 0.5) & (c[:, 0] > 0.5)
    order = np.argsort(c[on, 0])
    U = field.values[on][order]
    return c[on, 0][order] - 0.5, g.levels[on][order], U[:, 0], pressure(U)


def _three_waves(field, l_min):
    r, lv, rho, p = _ray(field)
    outer = r > RADIUS
    jump = p[outer].max() - 0.1
    assert jump > 0.05, "no shock"
    # shock: outermost crossing of the mid pressure
    r_s = r[outer & (p >= 0.1 + jump / 2)].max()
    band = outer & (p > 0.1 + 0.25 * jump) & (p < 0.1 + 0.75 * jump) & (np.abs(r - r_s) < 0.05)
    assert band.any() and np.all(lv[band] > l_min), "shock not on refined cells"
    # contact: largest density drop between RADIUS and the shock at nearly constant pressure
    inner = np.flatnonzero(outer[:-1] & (r[1:] < r_s))
    drops = rho[inner] - rho[inner + 1]
    flat = np.abs(p[inner] - p[inner + 1]) < 0.1 * jump
    assert flat.any()
    i = inner[flat][np.argmax(drops[flat])]
    assert drops[flat].max() > 0, "no contact"
    assert lv[i] > l_min and lv[i + 1] > l_min, "contact not on refined cells"
    # rarefaction: density has dropped at the centre and falls outward; binned
    # over 0.02 in r because the mesh only resolves radial symmetry near the origin coarsely
    assert rho[r < RADIUS].max() < 0.99
    edges = np.arange(0.0, 0.8 * RADIUS + 1e-12, 0.02)
    bins = np.digitize(r, edges)
    means = [rho[bins == b].mean() for b in range(1, len(edges))]
    assert np.all(np.diff(means) < 0), f"central density profile {np.round(means, 3)}"
    return r_s, r[i]


def _symmetry_error(field):
    g, rho = field.grid, field.values[:, 0]
    m = g.matrix
    worst = 0.0
    maps = [lambda c, q=q: oracles.rotate_line(m, c, q) for q in (1, 2, 3)] + [lambda c: oracles.mirror_line(m, c)]
    for f in maps:
        image = np.array([f(int(c)) for c in g.cells])
        pos = g.position[image]
        assert np.all(pos >= 0), "mesh not symmetric"
        worst = max(worst, float(np.max(np.abs(rho[pos] - rho))))
    return worst


def test_euler_explosion():
    with criterion("Euler explosion, levels 7..9"):
        t0 = time.perf_counter()
        cfg = EulerConfig(l_min=7, l_max=9, t_end=0.1, snapshot_times=(0.0, 0.025, 0.05, 0.075, 0.1))
        res = run_explosion(cfg)
        elapsed = time.perf_counter() - t0
        # constant state on the final adaptive mesh
        g = res.final.grid
        U = np.tile([0.7, 0.2, -0.1, 2.0], (len(g), 1))
        np.testing.assert_array_equal(euler_step(g, U, cfg)[0], U)
        # mass changes only by the flux through the walls
        mass = res.snapshots[0][1].grid.volumes @ res.snapshots[0][1].values[:, 0]
        residual = np.abs(np.array(res.mass_change) + np.array(res.mass_outflow))
        assert residual.max() <= 1e-12 * mass, f"mass residual {residual.max():.2e}"
        sym = max(_symmetry_error(f) for _, f in res.snapshots)
        assert sym <= 1e-10, f"symmetry error {sym:.2e}"
        r_s, r_c = _three_waves(res.final, cfg.l_min)
        print(f"  shock r={r_s:.3f}, contact r={r_c:.3f}, symmetry {sym:.1e}, {len(res.times)} steps")
        assert elapsed < 600, f"{elapsed:.1f} s"


def test_cancer_error_table():
    with criterion("cancer error table"):
        t0 = time.perf_counter()
        rows = error_table(CancerConfig())
        elapsed = time.perf_counter() - t0
        (_, n5, e5), (_, n6, e6), (_, na, ea) = rows
        for name, cells, err in rows:
            print(f"  {name}: {cells} cells, L1 {err:.3e}")
        assert e5 > e6 > ea, "error ordering"
        assert n6 == 4096 and na < n6, "cell counts"
        for got, ref in zip((e5, e6, ea), REFERENCE_ERRORS):
            assert ref / 2 <= got <= ref * 2, f"{got:.3e} vs {ref:.3e}"
        assert elapsed < 1200, f"{elapsed:.1f} s"


def test_cancer_structure():
    with criterion("cancer structural properties"):
        p = CancerParams()
        # zero-flux limit: spatially constant data follows forward Euler of the source
        m = cached_matrix(2, 5, 7)
        g = Grid.uniform(m)
        U = np.tile([0.05, 1.0, 0.0], (len(g), 1))
        ode = U[0].copy()
        for _ in range(50):
            U, dt = cancer_step(g, U, p, dt=0.05)
            ode = ode + dt * cancer_source(ode, p)
            assert np.all(np.abs(U - ode) <= 1e-12 * np.maximum(np.abs(ode), 1e-300))
        # adaptive invasion: pointwise v decay, c and MMP budgets per step
        grid = Grid.uniform(m)
        U = initial_condition("uniform-ecm", grid)
        th = Thresholds(0.2, 0.1)
        for _ in range(100):
            ifc = interfaces(grid)
            U_new, dt = cancer_step(grid, U, p, ifc=ifc)
            vol = grid.volumes
            assert np.all(U_new[:, 1] <= U[:, 1])
            dc = vol @ (U_new[:, 0] - U[:, 0]) - dt * vol @ (p.mu * U[:, 0] * (1 - U[:, 0]))
            dmmp = vol @ (U_new[:, 2] - U[:, 2]) - dt * vol @ (p.alpha * U[:, 0] - p.beta * U[:, 2])
            assert abs(dc) <= 1e-12 * (vol @ U[:, 0]), f"c budget {dc:.2e}"
            assert abs(dmmp) <= 1e-12 * (vol @ U[:, 2]), f"MMP budget {dmmp:.2e}"
            upd = mesh_update(grid, cancer_monitor(grid, U_new, ifc), th)
            U = transfer(Field(grid, U_new), upd.grid).values
            grid = upd.grid


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
