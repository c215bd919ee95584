import numpy as np
from hypothesis import given, settings, strategies as st

from dyadmesh import Field, Grid, Thresholds, mesh_update, project_down, project_up
from dyadmesh.cancer import cancer_flux
from dyadmesh.fields import integrate
from dyadmesh.topology import Direction, tiling_sum

import oracles
from conftest import cached_matrix

FAMILIES = [(2, 2, 4, 1), (2, 2, 5, 2), (2, 3, 5, 1), (1, 0, 5, 1)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FAMILIES), st.data())
def test_line_index_round_trip(family, data):
    m = cached_matrix(*family)
    lv = data.draw(st.integers(m.bounds.l_min, m.bounds.l_max))
    k = data.draw(st.integers(1, (1 << lv) ** m.d))
    line = int(m.line_of(lv, k))
    assert m.level[line] == lv and m.k[line] == k
    mo = int(m.mother[line])
    if lv > m.bounds.l_min:
        assert line in m.daughters[mo]
    else:
        assert mo == 0


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FAMILIES[:3]), st.integers(0, 2**32 - 1),
       st.floats(0.2, 0.9), st.floats(0.05, 0.9))
def test_mesh_update_keeps_regular_tiling(family, seed, th_r, th_c):
    m = cached_matrix(*family)
    rng = np.random.default_rng(seed)
    g = oracles.random_rsm(m, rng, rounds=2)
    for _ in range(2):
        g = mesh_update(g, rng.random(len(g)), Thresholds(th_r, min(th_c, th_r))).grid
        assert abs(tiling_sum(g) - 1.0) <= 1e-12
        assert oracles.is_tiling(g) and oracles.is_regular(g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_pair_conserves(seed):
    rng = np.random.default_rng(seed)
    m = cached_matrix(2, 2, 5)
    fine = oracles.random_rsm(m, rng, rounds=3)
    lv = int(rng.integers(2, 5))
    coarse = Grid(m, np.unique(m.ancestor_at_level(fine.cells, np.minimum(fine.levels, lv))))
    f = Field(fine, rng.normal(size=len(fine)))
    down = project_down(f, coarse)
    scale = np.abs(f.values[:, 0]) @ fine.volumes
    assert abs(integrate(down)[0] - integrate(f)[0]) <= 1e-12 * scale
    np.testing.assert_array_equal(project_down(project_up(down, fine), coarse).values, down.values)


states = st.lists(st.floats(0.0, 2.0), min_size=3, max_size=3).map(np.array)


@settings(max_examples=100, deadline=None)
@given(states, states, st.sampled_from(list(Direction)), st.floats(1e-3, 0.5))
def test_cancer_flux_conservative(Ui, Uj, d, dist):
    np.testing.assert_allclose(cancer_flux(Ui, Uj, d, dist), -cancer_flux(Uj, Ui, d.opposite, dist),
                               rtol=1e-13, atol=1e-15)
