import numpy as np
import pytest

from conftest import random_pattern
from ringmatch.bp import MatchResult
from ringmatch.geometry import generate_instance
from ringmatch.junction import (
    DEFAULT_JT_BYTE_CAP,
    build_jt_tables,
    build_junction_tree,
    jt_map,
)
from ringmatch.oracle import brute_force_map
from ringmatch.potentials import PotentialParams
from ringmatch.topology import (
    ResourceLimitError,
    attachment_triple,
    build_squared_cycle,
    build_three_tree,
)


@pytest.mark.parametrize("n", [4, 5, 8, 13])
@pytest.mark.parametrize("seed", [0, 2])
def test_junction_tree_structure(n, seed):
    g = build_three_tree(n, seed=seed)
    jt = build_junction_tree(g)
    assert len(jt.cliques) == n - 3
    assert jt.parents[0] == -1 and jt.root == 0
    for i, cl in enumerate(jt.cliques):
        assert cl == tuple(sorted(cl)) and len(cl) == 4
        assert jt.added[i] in cl
        if i > 0:
            p = jt.parents[i]
            assert 0 <= p < i  # parents precede children
            assert jt.separators[i] == attachment_triple(g, jt.added[i])
            assert set(jt.separators[i]) <= set(jt.cliques[p])
            assert set(jt.separators[i]) == set(cl) & set(jt.separators[i])
    # edge ownership partitions the 3-tree's edge set
    owned = [e for edges in jt.owned_edges for e in edges]
    assert len(owned) == len(set(owned)) == len(g.edges) == 3 * n - 6
    assert set(owned) == set(g.edges)
    assert len(jt.owned_edges[0]) == 6  # root: base triangle + attachment


def test_junction_tree_rejects_wrong_inputs():
    with pytest.raises(ValueError, match="three_tree"):
        build_junction_tree(build_squared_cycle(6))
    with pytest.raises(ValueError, match="n >= 4"):
        build_junction_tree(build_three_tree(3))


def test_jt_tables_axes_follow_sorted_cliques():
    t = random_pattern(0, 6)
    s = random_pattern(1, 5)
    jt = build_junction_tree(build_three_tree(6, seed=1))
    tables = build_jt_tables(t, s, jt, PotentialParams())
    assert len(tables) == 3
    for tab in tables:
        assert tab.shape == (5, 5, 5, 5)
        assert np.all(tab > 0)


@pytest.mark.parametrize("clamp_mode", ["per_edge", "per_clique"])
def test_jt_map_equals_exhaustive_argmax(clamp_mode):
    """The tree algorithm against raw enumeration over the same tables."""
    for seed in range(10):
        n = 4 + seed % 3
        m = n + seed % 2
        t, s, _ = generate_instance(n, m, 2 / 256, seed=seed)
        params = PotentialParams(clamp_mode=clamp_mode)
        jt = build_junction_tree(build_three_tree(n, seed=seed))
        tables = build_jt_tables(t, s, jt, params)
        oracle_a, oracle_score = brute_force_map(jt.cliques, tables, n, m)
        r = jt_map(t, s, jt, params=params)
        assert np.array_equal(r.assignment, oracle_a), f"seed {seed}"


def test_jt_map_recovers_planted_copy():
    for seed in range(6):
        t, s, truth = generate_instance(7, 10, 0.0, seed=seed)
        jt = build_junction_tree(build_three_tree(7, seed=0))
        r = jt_map(t, s, jt, params=PotentialParams(mode="delta"))
        assert isinstance(r, MatchResult)
        assert np.array_equal(r.assignment, truth)
        assert r.residual < 1e-18
        assert r.converged and r.iterations == 1
        assert r.collisions == 0
        assert all(len(ts) == 1 for ts in r.tie_sets)


def test_jt_map_default_params_are_gaussian():
    t, s, truth = generate_instance(6, 8, 0.0, seed=3)
    jt = build_junction_tree(build_three_tree(6, seed=0))
    assert np.array_equal(jt_map(t, s, jt).assignment, truth)


def test_jt_map_deterministic_per_tree_seed():
    t, s, _ = generate_instance(8, 11, 3 / 256, seed=9)
    results = []
    for tree_seed in (0, 1, 4):
        jt = build_junction_tree(build_three_tree(8, seed=tree_seed))
        r1 = jt_map(t, s, jt)
        r2 = jt_map(t, s, jt)
        assert np.array_equal(r1.assignment, r2.assignment)
        results.append(r1.assignment)
    # different 3-trees may legitimately disagree on noisy instances, but each
    # must still produce a valid map
    for a in results:
        assert np.all((0 <= a) & (a < 11))


def test_byte_cap_blocks_oversized_tables():
    t = random_pattern(0, 10)
    s = random_pattern(1, 40)
    jt = build_junction_tree(build_three_tree(10, seed=0))
    need = 7 * (40**4 + 40**3) * 8
    with pytest.raises(ResourceLimitError, match=str(need)):
        jt_map(t, s, jt, max_bytes=need - 1)
    # and the default cap clears this size comfortably
    assert need < DEFAULT_JT_BYTE_CAP


def test_single_clique_tree():
    # n=4: the junction tree is one clique, no message passing at all
    t, s, truth = generate_instance(4, 6, 0.0, seed=2)
    jt = build_junction_tree(build_three_tree(4, seed=0))
    assert len(jt.cliques) == 1
    r = jt_map(t, s, jt, params=PotentialParams(mode="delta"))
    assert np.array_equal(r.assignment, truth)
