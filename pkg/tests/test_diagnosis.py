import numpy as np
import pytest

import oracles
from structfdi.diagnosis import (
    compare_matrices,
    detectable_faults,
    diagnosis_report,
    isolability_matrix,
    isolable,
)
from structfdi.pitchbench import build_pitch_model
from structfdi.randmodels import random_model
from structfdi.structmodel import ModelError, SensorSpec, add_sensor, parse_model

SINGLE_CONSTRAINT = """
[variables]
x : unknown
f : fault

[constraints]
c1 : {x, f}
"""

TWO_FAULTS_ONE_REDUNDANCY = """
[variables]
x : unknown
f_a : fault
f_b : fault

[constraints]
c1 : {x}
c2 : {x, f_a, f_b}
"""


def test_just_determined_fault_is_undetectable():
    verdicts = detectable_faults(parse_model(SINGLE_CONSTRAINT))
    assert verdicts == [type(verdicts[0])("f", False, None)]


def test_redundant_pair_makes_faults_detectable_but_grouped():
    m = parse_model(TWO_FAULTS_ONE_REDUNDANCY)
    matrix = isolability_matrix(m)
    assert set(matrix.detectable) == {"f_a", "f_b"}
    assert matrix.cells == ((True, True), (True, True))
    assert matrix.blocks() == (("f_a", "f_b"),)


def test_one_detectable_fault_gives_1x1_true():
    text = "[variables]\nx : unknown\nf : fault\n\n[constraints]\nc1 : {x}\nc2 : {x, f}\n"
    matrix = isolability_matrix(parse_model(text))
    assert matrix.faults == ("f",)
    assert matrix.cells == ((True,),)


def test_isolable_raises_on_bad_ids():
    m = parse_model(TWO_FAULTS_ONE_REDUNDANCY)
    with pytest.raises(ModelError):
        isolable(m, "f_a", "f_a")
    with pytest.raises(ModelError):
        isolable(m, "f_a", "nope")


def test_undetectable_faults_have_all_false_rows_and_columns():
    matrix = isolability_matrix(build_pitch_model(1, "standard"))
    i = matrix.faults.index("f_Fr_c")
    assert not any(matrix.cells[i])
    assert not any(row[i] for row in matrix.cells)
    assert matrix.faults[-1] == "f_Fr_c"  # undetectable sorted last, row-wise


def test_diagonal_matches_detectability():
    m = build_pitch_model(1, "standard")
    matrix = isolability_matrix(m)
    det = {v.fault: v.detectable for v in detectable_faults(m)}
    for i, f in enumerate(matrix.faults):
        assert matrix.cells[i][i] == det[f]


def test_isolable_agrees_with_bruteforce_on_random_models():
    rng = np.random.default_rng(13)
    for _ in range(30):
        m = random_model(rng)
        faults = m.fault_ids()
        for fi in faults:
            for fj in faults:
                if fi == fj:
                    continue
                assert isolable(m, fi, fj) == oracles.isolable(m, fi, fj), (m, fi, fj)


def test_detectability_monotone_under_added_sensor():
    rng = np.random.default_rng(17)
    for _ in range(30):
        m = random_model(rng)
        before = {v.fault for v in detectable_faults(m) if v.detectable}
        target = str(rng.choice(m.unknown_ids()))
        m2 = add_sensor(m, SensorSpec(target, f"s_{target}"))
        after = {v.fault for v in detectable_faults(m2) if v.detectable}
        assert before <= after


def test_same_class_faults_are_mutually_non_isolable():
    rng = np.random.default_rng(19)
    models = [build_pitch_model(1, "standard")] + [random_model(rng) for _ in range(20)]
    for m in models:
        verdicts = detectable_faults(m)
        by_class: dict[str, list[str]] = {}
        for v in verdicts:
            if v.detectable and v.class_id:
                by_class.setdefault(v.class_id, []).append(v.fault)
        for members in by_class.values():
            for a in members:
                for b in members:
                    if a != b:
                        assert not isolable(m, a, b)


def test_mutual_non_isolability_transitive_on_benchmark():
    matrix = isolability_matrix(build_pitch_model(1, "standard"))
    det = list(matrix.detectable)
    rel = {(a, b) for a in det for b in det
           if a != b and matrix.cell(a, b) and matrix.cell(b, a)}
    for a, b in rel:
        for c in det:
            if c not in (a, b) and (b, c) in rel:
                assert (a, c) in rel


def test_compare_matrix_with_itself_is_empty():
    matrix = isolability_matrix(build_pitch_model(1, "standard"))
    assert compare_matrices(matrix, matrix).empty


def test_compare_detects_single_flip():
    matrix = isolability_matrix(parse_model(TWO_FAULTS_ONE_REDUNDANCY))
    flipped = type(matrix)(matrix.faults,
                           ((True, False), matrix.cells[1]),
                           matrix.detectable)
    diff = compare_matrices(matrix, flipped)
    assert len(diff) == 1
    assert diff.entries[0][:2] == ("f_a", "f_b")


def test_compare_rejects_different_fault_sets():
    a = isolability_matrix(parse_model(TWO_FAULTS_ONE_REDUNDANCY))
    b = isolability_matrix(parse_model(SINGLE_CONSTRAINT))
    with pytest.raises(ModelError):
        compare_matrices(a, b)


def test_report_structure():
    report = diagnosis_report(build_pitch_model(1, "standard"))
    assert report["dm"]["just"]["pairs"] == [["c_fb", "F_ext"]]
    by_fault = {entry["fault"]: entry for entry in report["faults"]}
    assert by_fault["f_Fr_c"]["detectable"] is False
    assert by_fault["f_Q_le_p"]["detectable"] is True
    assert "f_Q_le_r" in by_fault["f_Q_le_p"]["isolable_from"]
    assert ["f_Fr_v", "f_wv_v"] in report["blocks"]
