import numpy as np
import pytest

from structfdi.diagnosis import compare_matrices, isolability_matrix
from structfdi.pitchbench import build_pitch_model
from structfdi.regions import enumerate_regions, sweep_regions
from structfdi.structmodel import load_model, parse_model

GATE_FREE = """
[variables]
x : unknown
f : fault

[constraints]
c1 : {x}
c2 : {x, f}
"""


def test_enumerate_no_switches_gives_single_empty_assignment():
    assert enumerate_regions(parse_model(GATE_FREE)) == [{}]


def test_enumerate_single_cylinder_gives_16_in_order():
    m = build_pitch_model(1, "standard")
    assignments = enumerate_regions(m)
    assert len(assignments) == 16
    assert assignments[0] == {s: "negative" for s in m.switch_ids()}
    assert assignments[-1] == {s: "positive" for s in m.switch_ids()}
    assert len({tuple(sorted(a.items())) for a in assignments}) == 16


def test_enumerate_full_model_gives_256():
    assert len(enumerate_regions(build_pitch_model(3, "standard"))) == 256


def test_gate_free_sweep_returns_whole_model_matrix():
    m = parse_model(GATE_FREE)
    sweep = sweep_regions(m)
    assert len(sweep.matrices) == 1
    assert sweep.invariant
    assert compare_matrices(sweep.matrices[0], isolability_matrix(m)).empty


def test_single_cylinder_sweep_is_invariant():
    sweep = sweep_regions(build_pitch_model(1, "standard"))
    assert len(sweep.assignments) == 16
    assert sweep.invariant
    assert all(d.empty for _, d in sweep.diffs)
    whole = sweep.whole_model_matrix
    for m in sweep.matrices:
        assert compare_matrices(whole, m).empty
    assert sweep.whole_model_superset


def test_counterexample_model_is_not_invariant(models_dir):
    m = load_model(models_dir / "region_counterexample.sm")
    sweep = sweep_regions(m)
    assert not sweep.invariant
    (_, idx), diff = next((pair, d) for pair, d in sweep.diffs if not d.empty)
    assert len(diff) == 1
    assert diff.entries[0][:2] == ("f", "f")


def test_specialization_preserves_fault_sets_across_regions():
    m = build_pitch_model(1, "standard")
    sweep = sweep_regions(m)
    for matrix in sweep.matrices:
        assert set(matrix.faults) == set(m.fault_ids())
