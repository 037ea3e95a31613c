import numpy as np
import pytest

import oracles
from structfdi.graphcore import (
    Bipartite,
    dm_decompose,
    dot_export,
    equivalence_classes,
    from_model,
    incidence_csv,
    max_matching,
)
from structfdi.pitchbench import build_pitch_model
from structfdi.randmodels import random_bipartite
from structfdi.structmodel import condense_gates


def bip(edges: dict[str, list[str]], right: list[str]) -> Bipartite:
    left = tuple(edges)
    return Bipartite(left, tuple(right), tuple(tuple(edges[l]) for l in left))


def test_empty_graph_empty_matching():
    g = Bipartite((), (), ())
    assert len(max_matching(g)) == 0


def test_complete_3x3_has_perfect_matching():
    right = ["x1", "x2", "x3"]
    g = bip({f"c{i}": right for i in range(3)}, right)
    assert len(max_matching(g)) == 3


def test_matching_pairs_are_edges_and_injective():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = random_bipartite(rng)
        m = max_matching(g)
        adj = g.adjacency()
        assert len({c for c, _ in m.pairs}) == len(m.pairs)
        assert len({v for _, v in m.pairs}) == len(m.pairs)
        for c, v in m.pairs:
            assert v in adj[c]


def test_matching_size_matches_bruteforce_oracle():
    rng = np.random.default_rng(11)
    for _ in range(60):
        g = random_bipartite(rng)
        assert len(max_matching(g)) == oracles.matching_size(g)


def test_matching_size_invariant_under_permutation():
    rng = np.random.default_rng(5)
    g = random_bipartite(rng, max_left=8, max_right=8, p_edge=0.4)
    size = len(max_matching(g))
    for _ in range(100):
        perm_l = rng.permutation(len(g.left))
        left = tuple(g.left[i] for i in perm_l)
        edges = tuple(tuple(rng.permutation(g.edges[i])) for i in perm_l)
        right = tuple(rng.permutation(g.right))
        assert len(max_matching(Bipartite(left, right, edges))) == size


# ---------------------------------------------------------------------------
# DM decomposition


def test_single_pair_is_just_determined():
    g = bip({"c1": ["x"]}, ["x"])
    dm = dm_decompose(g)
    assert dm.just_pairs == (("c1", "x"),)
    assert not dm.over_constraints and not dm.under_variables


def test_shared_variable_puts_both_constraints_over():
    g = bip({"c1": ["x"], "c2": ["x"]}, ["x"])
    dm = dm_decompose(g)
    assert set(dm.over_constraints) == {"c1", "c2"}
    assert dm.over_variables == ("x",)


def test_unmatched_variable_goes_under():
    g = bip({"c1": ["x", "y"]}, ["x", "y"])
    dm = dm_decompose(g)
    assert set(dm.under_variables) == {"x", "y"}
    assert dm.under_constraints == ("c1",)
    assert not dm.over_constraints


def test_pitch_force_balances_are_just_determined():
    m = condense_gates(build_pitch_model(3, "standard"))
    dm = dm_decompose(from_model(m))
    assert set(dm.just_constraints) == {"c_fb1", "c_fb2", "c_fb3"}
    assert set(dm.just_variables) == {"F_ext1", "F_ext2", "F_ext3"}
    assert not dm.under_variables


def _partition_invariants(g: Bipartite, dm) -> None:
    all_c = set(g.left)
    parts_c = [set(dm.under_constraints), set(dm.just_constraints), set(dm.over_constraints)]
    assert set().union(*parts_c) == all_c
    assert sum(len(p) for p in parts_c) == len(all_c)
    all_v = set(g.right)
    parts_v = [set(dm.under_variables), set(dm.just_variables), set(dm.over_variables)]
    assert set().union(*parts_v) == all_v
    assert sum(len(p) for p in parts_v) == len(all_v)
    by_c = dm.matching.by_constraint()
    by_v = dm.matching.by_variable()
    if dm.over_constraints:
        assert all(v in by_v for v in dm.over_variables)
        assert any(c not in by_c for c in dm.over_constraints)
    if dm.under_variables:
        assert any(v not in by_v for v in dm.under_variables)
        assert all(c in by_c for c in dm.under_constraints)


def test_dm_invariants_on_random_corpus():
    rng = np.random.default_rng(23)
    for _ in range(80):
        g = random_bipartite(rng)
        _partition_invariants(g, dm_decompose(g))


def test_dm_partition_permutation_invariant():
    rng = np.random.default_rng(29)
    for _ in range(30):
        g = random_bipartite(rng)
        dm = dm_decompose(g)
        ref = (set(dm.under_constraints), set(dm.just_constraints), set(dm.over_constraints),
               set(dm.under_variables), set(dm.over_variables))
        for _ in range(5):
            perm_l = rng.permutation(len(g.left))
            left = tuple(g.left[i] for i in perm_l)
            edges = tuple(tuple(rng.permutation(g.edges[i])) for i in perm_l)
            right = tuple(rng.permutation(g.right))
            dm2 = dm_decompose(Bipartite(left, right, edges))
            got = (set(dm2.under_constraints), set(dm2.just_constraints), set(dm2.over_constraints),
                   set(dm2.under_variables), set(dm2.over_variables))
            assert got == ref


def test_over_part_matches_oracle():
    rng = np.random.default_rng(31)
    for _ in range(50):
        g = random_bipartite(rng)
        dm = dm_decompose(g)
        assert set(dm.over_constraints) == oracles.over_constraints(g)


def test_removing_over_constraint_never_hurts_just_part():
    rng = np.random.default_rng(37)
    for _ in range(40):
        g = random_bipartite(rng)
        dm = dm_decompose(g)
        for c in dm.over_constraints:
            dm2 = dm_decompose(g.without_left([c]))
            assert set(dm2.under_variables) == set(dm.under_variables)


# ---------------------------------------------------------------------------
# equivalence classes


def test_duplicate_measurements_form_one_class():
    g = bip({"c1": ["x"], "c2": ["x"]}, ["x"])
    dm = dm_decompose(g)
    assert equivalence_classes(g, dm) == (("c1", "c2"),)


def test_independent_redundancy_sources_stay_separate():
    g = bip({"c1": ["x"], "c2": ["x"], "c3": ["y"], "c4": ["y"]}, ["x", "y"])
    dm = dm_decompose(g)
    classes = {frozenset(cl) for cl in equivalence_classes(g, dm)}
    assert classes == {frozenset({"c1", "c2"}), frozenset({"c3", "c4"})}


def test_classes_partition_and_are_symmetric():
    rng = np.random.default_rng(41)
    checked = 0
    while checked < 25:
        g = random_bipartite(rng, p_edge=0.45)
        dm = dm_decompose(g)
        if len(dm.over_constraints) < 2:
            continue
        checked += 1
        classes = equivalence_classes(g, dm)
        flat = [c for cl in classes for c in cl]
        assert sorted(flat) == sorted(dm.over_constraints)
        over = set(dm.over_constraints)
        for cl in classes:
            for a in cl:
                remaining = oracles.over_constraints(g.without_left([a]))
                expelled = {c for c in over if c not in remaining and c != a}
                assert expelled == set(cl) - {a}


def test_valve_and_flow_constraints_in_distinct_classes():
    m = condense_gates(build_pitch_model(1, "standard"))
    g = from_model(m)
    dm = dm_decompose(g)
    classes = equivalence_classes(g, dm)
    of = {c: i for i, cl in enumerate(classes) for c in cl}
    assert of["c_xv"] != of["c_qp"]
    assert {"c_xv", "d_x_v"} == {c for c, i in of.items() if i == of["c_xv"]}


# ---------------------------------------------------------------------------
# exports


def test_incidence_csv_shape():
    g = bip({"c1": ["x"], "c2": ["x", "y"]}, ["x", "y"])
    lines = incidence_csv(g).strip().splitlines()
    assert lines[0] == "constraint,x,y"
    assert lines[1] == "c1,1,0"
    assert lines[2] == "c2,1,1"


def test_dot_export_mentions_all_vertices():
    m = condense_gates(build_pitch_model(1, "standard"))
    g = from_model(m)
    dot = dot_export(g, fine_blocks=True)
    assert dot.startswith("graph structure {")
    for c in g.left:
        assert f'"c:{c}"' in dot
    for v in g.right:
        assert f'"v:{v}"' in dot
    assert "cluster_just" in dot  # fine blocks requested
