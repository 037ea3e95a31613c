import itertools

import numpy as np
import pytest

from structfdi.structmodel import (
    ModelError,
    ModelFormatError,
    SensorSpec,
    add_sensor,
    condense_gates,
    expand_differential,
    parse_model,
    serialize_model,
    specialize_region,
    validate,
)
from structfdi.randmodels import random_model

MINIMAL = """
[variables]
x : unknown

[constraints]
c1 : {x}
"""

GATED = """
[switches]
s : "x >= 0"

[variables]
x : unknown
y : unknown
f : fault

[constraints]
c_a_pos : {x, f} gate=s:+
c_a_neg : {x, y, f} gate=s:-
c_b : {y}
"""


def test_parse_minimal_model():
    m = parse_model(MINIMAL)
    assert m.unknown_ids() == ("x",)
    assert len(m.constraints) == 1
    assert m.constraints[0].touches == ("x",)
    assert validate(m).ok


def test_parse_keeps_docs_and_round_trips():
    text = "[variables]\nx : unknown  # the state\n\n[constraints]\nc1 : {x}  # its relation\n"
    m = parse_model(text)
    assert m.variables[0].description == "the state"
    assert m.constraints[0].doc == "its relation"
    again = parse_model(serialize_model(m))
    assert again.variables == m.variables
    assert again.constraints == m.constraints


def test_round_trip_is_fixed_point():
    m = parse_model(GATED)
    once = serialize_model(m)
    twice = serialize_model(parse_model(once))
    assert once == twice


@pytest.mark.parametrize("text,fragment", [
    ("[variables]\nx unknown\n", "expected"),
    ("[variables]\nx : banana\n", "kind"),
    ("[variables]\nx : unknown\nx : unknown\n", "duplicate"),
    ("[variables]\nx : unknown\n[constraints]\nc : {x,z}\n", "undeclared"),
    ("[variables]\nx : unknown\n[constraints]\nc : {x} gate=s:+\n", "switch"),
    ("[widgets]\n", "unknown section"),
    ("x : unknown\n", "before any section"),
    ("[variables]\nx : unknown frob=1\n", "unknown key"),
])
def test_parse_errors(text, fragment):
    with pytest.raises((ModelFormatError, ModelError)) as err:
        parse_model(text)
    assert fragment in str(err.value)


def test_parse_error_reports_line_number():
    bad = "[variables]\nx : unknown\ny : wrong\n"
    with pytest.raises(ModelFormatError) as err:
        parse_model(bad)
    assert err.value.line == 3


def test_validate_flags_orphan_fault():
    text = "[variables]\nx : unknown\nf : fault\n\n[constraints]\nc1 : {x}\n"
    with pytest.raises(ModelError) as err:
        parse_model(text)
    assert "orphan-fault" in str(err.value)


def test_validate_collects_violations_without_raising():
    m = parse_model(MINIMAL)
    report = validate(m)
    assert report.ok and not report.violations


# ---------------------------------------------------------------------------
# add_sensor


def test_add_sensor_counts_and_immutability():
    m = parse_model(MINIMAL)
    m2 = add_sensor(m, SensorSpec("x", "x"))
    assert len(m2.constraints) == len(m.constraints) + 1
    assert len(m2.variables) == len(m.variables) + 2  # known + fault
    assert len(m.constraints) == 1  # original untouched
    c = m2.constraints[-1]
    assert set(c.touches) == {"y_x", "x", "f_y_x"}
    assert c.faults == ("f_y_x",)


def test_add_sensor_without_fault():
    m2 = add_sensor(parse_model(MINIMAL), SensorSpec("x", "x", adds_fault=False))
    assert len(m2.variables) == 2
    assert set(m2.constraints[-1].touches) == {"y_x", "x"}


def test_add_sensor_twice_gets_distinct_ids():
    m = parse_model(MINIMAL)
    m2 = add_sensor(add_sensor(m, SensorSpec("x", "x")), SensorSpec("x", "x"))
    sensor_constraints = [c for c in m2.constraints if c.id.startswith("c_y_")]
    assert len(sensor_constraints) == 2
    assert len({c.id for c in sensor_constraints}) == 2
    assert len({c.faults[0] for c in sensor_constraints}) == 2


def test_add_sensor_rejects_known_and_missing():
    text = "[variables]\nx : unknown\nk : known\n\n[constraints]\nc1 : {x, k}\n"
    m = parse_model(text)
    with pytest.raises(ModelError):
        add_sensor(m, SensorSpec("k", "k"))
    with pytest.raises(ModelError):
        add_sensor(m, SensorSpec("missing", "m"))


# ---------------------------------------------------------------------------
# specialize_region / condense_gates


def test_specialize_identity_on_gate_free_model():
    m = parse_model(MINIMAL)
    assert specialize_region(m, {}).constraints == m.constraints


def test_specialize_picks_branches_and_strips_gates():
    m = parse_model(GATED)
    pos = specialize_region(m, {"s": "positive"})
    assert [c.id for c in pos.constraints] == ["c_a_pos", "c_b"]
    assert all(c.gate is None for c in pos.constraints)
    assert pos.unknown_ids() == m.unknown_ids()  # variable set unchanged
    neg = specialize_region(m, {"s": "negative"})
    assert [c.id for c in neg.constraints] == ["c_a_neg", "c_b"]


def test_specialize_missing_switch_errors():
    with pytest.raises(ModelError):
        specialize_region(parse_model(GATED), {})


def test_specialize_union_over_assignments_covers_gated_constraints():
    m = parse_model(GATED)
    gated = {c.id for c in m.constraints if c.gate is not None}
    kept = set()
    for branch in ("positive", "negative"):
        spec = specialize_region(m, {"s": branch})
        kept |= {c.id for c in spec.constraints} & gated
    assert kept == gated


def test_condense_merges_branch_pairs_with_condition_vars():
    m = parse_model(GATED)
    c = condense_gates(m)
    ids = [k.id for k in c.constraints]
    assert ids == ["c_a", "c_b"]
    merged = c.constraints[0]
    assert set(merged.touches) == {"x", "y", "f"}  # union incl. condition var x
    assert merged.faults == ("f",)
    assert not c.has_gates()


def test_condense_noop_without_gates():
    m = parse_model(MINIMAL)
    assert condense_gates(m) is m


# ---------------------------------------------------------------------------
# expand_differential


DERIV = """
[variables]
x : unknown
v : unknown deriv_of=x

[constraints]
c1 : {v}
"""


def test_expand_adds_differential_constraint():
    m = expand_differential(parse_model(DERIV))
    d = m.constraint("d_x")
    assert set(d.touches) == {"v", "x"}


def test_expand_is_idempotent():
    m = expand_differential(parse_model(DERIV))
    assert expand_differential(m) is m


def test_expand_without_pairs_is_identity():
    m = parse_model(MINIMAL)
    assert expand_differential(m) is m


def test_specialized_random_models_keep_fault_sets():
    rng = np.random.default_rng(7)
    for _ in range(25):
        m = random_model(rng)
        spec = specialize_region(m, {})
        assert spec.fault_ids() == m.fault_ids()
