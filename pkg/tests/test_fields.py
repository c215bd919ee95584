import numpy as np
import pytest

from dyadmesh import Field, Grid, GridMismatchError, l1_distance, project_down, project_up, transfer
from dyadmesh.fields import common_coarsening, integrate, read_snapshot, write_snapshot

import oracles
from conftest import cached_matrix


def _coarser(grid: Grid, rng) -> Grid:
    """Random coarsening: cut the grid at a random ancestor level per coarse cell."""
    m = grid.matrix
    lv = int(rng.integers(m.bounds.l_min, m.bounds.l_max))
    anc = m.ancestor_at_level(grid.cells, np.minimum(grid.levels, lv))
    return Grid(m, np.unique(anc))


def test_field_validation():
    g = Grid.uniform(cached_matrix(2, 1, 3))
    with pytest.raises(ValueError):
        Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        Field(g, [np.nan, 0, 0, 0])
    f = Field(g, np.arange(4.0))
    assert f.components == 1 and f.names == ("u0",)


def test_integrate_examples(rng):
    m = cached_matrix(2, 1, 5)
    g = Grid.uniform(m)
    assert integrate(Field(g, [1.0, 2.0, 3.0, 4.0]))[0] == 2.5
    r = oracles.random_rsm(m, rng)
    assert integrate(Field(r, np.ones(len(r))))[0] == 1.0


def test_identity_projections(rng):
    m = cached_matrix(2, 2, 5)
    g = oracles.random_rsm(m, rng)
    f = Field(g, rng.random((len(g), 3)))
    np.testing.assert_array_equal(project_down(f, g).values, f.values)
    np.testing.assert_array_equal(project_up(f, g).values, f.values)


def test_four_siblings_average():
    m = cached_matrix(2, 0, 1)
    fine = Grid.uniform(m, 1)
    f = Field(fine, [1.0, 2.0, 3.0, 4.0])
    assert project_down(f, Grid.uniform(m, 0)).values[0, 0] == 2.5


def test_refine_one_cell_injects():
    m = cached_matrix(2, 1, 3)
    g = Grid.uniform(m)
    f = Field(g, [7.0, 1.0, 1.0, 1.0])
    target = Grid(m, list(m.daughters_of(int(g.cells[0]))) + list(g.cells[1:]))
    up = project_up(f, target)
    np.testing.assert_array_equal(up.values[:4, 0], 7.0)
    assert integrate(up)[0] == integrate(f)[0]


def test_wrong_direction_raises(rng):
    m = cached_matrix(2, 2, 5)
    fine = oracles.random_rsm(m, rng, rounds=5, fraction=0.3)
    coarse = Grid.uniform(m)
    f = Field(fine, rng.random(len(fine)))
    with pytest.raises(GridMismatchError):
        project_up(f, coarse)
    with pytest.raises(GridMismatchError):
        project_down(Field(coarse, np.ones(len(coarse))), fine)
    other = cached_matrix(2, 2, 4)
    with pytest.raises(GridMismatchError):
        transfer(f, Grid.uniform(other))


def test_conservation_and_roundtrip(rng):
    m = cached_matrix(2, 2, 6)
    for _ in range(20):
        fine = oracles.random_rsm(m, rng)
        coarse = _coarser(fine, rng)
        f = Field(fine, rng.normal(size=(len(fine), 2)))
        down = project_down(f, coarse)
        scale = np.abs(f.values).T @ fine.volumes
        np.testing.assert_array_less(np.abs(integrate(down) - integrate(f)), 1e-12 * scale)
        g = Field(coarse, rng.normal(size=(len(coarse), 2)))
        up = project_up(g, fine)
        np.testing.assert_array_less(np.abs(integrate(up) - integrate(g)), 1e-12 * np.abs(g.values).T @ coarse.volumes + 1e-300)
        np.testing.assert_array_equal(project_down(up, coarse).values, g.values)


def test_transfer_handles_mixed_updates(rng):
    m = cached_matrix(2, 2, 6)
    a = oracles.random_rsm(m, rng)
    b = oracles.random_rsm(m, rng)
    c = common_coarsening(a, b)
    f = Field(a, rng.random(len(a)))
    # a -> common coarsening is pure coarsening; then up to b is pure refinement
    np.testing.assert_allclose(transfer(f, c).values, project_down(f, c).values, rtol=0, atol=0)


def test_l1_examples(rng):
    m = cached_matrix(2, 2, 5)
    a = oracles.random_rsm(m, rng)
    b = oracles.random_rsm(m, rng)
    fa = Field(a, rng.random(len(a)))
    assert l1_distance(fa, fa)[0] == 0.0
    np.testing.assert_allclose(l1_distance(Field(a, np.full(len(a), 0.3)), Field(b, np.full(len(b), 1.7))), [1.4], rtol=1e-14)


def test_l1_equals_overlay_oracle(rng):
    m = cached_matrix(2, 2, 6)
    for _ in range(20):
        a, b = oracles.random_rsm(m, rng), oracles.random_rsm(m, rng)
        va, vb = rng.normal(size=(len(a), 2)), rng.normal(size=(len(b), 2))
        got = l1_distance(Field(a, va), Field(b, vb))
        ref = oracles.overlay_l1(a, va, b, vb)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_l1_pseudometric(rng):
    m = cached_matrix(2, 2, 5)
    grids = [oracles.random_rsm(m, rng) for _ in range(3)]
    fs = [Field(g, rng.random(len(g))) for g in grids]
    d = lambda x, y: l1_distance(x, y)[0]
    assert d(fs[0], fs[1]) == pytest.approx(d(fs[1], fs[0]), rel=1e-14)
    # triangle inequality holds on a shared coarsening of all three
    base = common_coarsening(common_coarsening(grids[0], grids[1]), grids[2])
    p = [project_down(f, base) for f in fs]
    assert d(p[0], p[2]) <= d(p[0], p[1]) + d(p[1], p[2]) + 1e-15


def test_snapshot_format_and_determinism(tmp_path):
    m = cached_matrix(2, 0, 2)
    g = Grid.uniform(m, 1)
    p = write_snapshot(tmp_path / "g.csv", g)
    lines = p.read_text().splitlines()
    assert lines[0] == "line,level,center_x,center_y,size"
    centers = [tuple(float(v) for v in row.split(",")[2:4]) for row in lines[1:]]
    assert centers == [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]
    q = write_snapshot(tmp_path / "f.csv", g, np.arange(8.0).reshape(4, 2), ("a", "b"))
    r = write_snapshot(tmp_path / "f2.csv", g, np.arange(8.0).reshape(4, 2), ("a", "b"))
    assert q.read_bytes() == r.read_bytes()
    header, lines_, levels, table = read_snapshot(q)
    assert header[-2:] == ["a", "b"]
    np.testing.assert_array_equal(lines_, g.cells)


def test_snapshot_1d_example_sizes(tmp_path, example_1d):
    g = Grid(example_1d, [2, 12, 13, 7])
    header, _, _, table = read_snapshot(write_snapshot(tmp_path / "s.csv", g))
    assert header == ["line", "level", "center_x", "size"]
    np.testing.assert_array_equal(table[:, -1], [0.5, 0.125, 0.125, 0.25])


def test_snapshot_io_error_has_path(tmp_path):
    g = Grid.uniform(cached_matrix(2, 0, 1))
    target = tmp_path / "missing" / "deeper"
    (tmp_path / "missing").write_text("not a directory")
    with pytest.raises(OSError, match="missing"):
        write_snapshot(target / "x.csv", g)
