"""Constraint-based structural models: domain types, the text format, transforms.

A structural model records only incidence, i.e. which symbols appear in which
relation, never the analytic form of the relation.  That is all the downstream
matching / decomposition machinery needs: detectability and isolability are
properties of the structure alone.

Models are immutable; every transform returns a new model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional

UNKNOWN = "unknown"
KNOWN = "known"
FAULT = "fault"
_KINDS = (UNKNOWN, KNOWN, FAULT)

POSITIVE = "positive"
NEGATIVE = "negative"
BOTH = "both"
_BRANCHES = (POSITIVE, NEGATIVE, BOTH)

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ModelError(Exception):
    """Base class for structural-model errors."""


class ModelFormatError(ModelError):
    """Raised on malformed model-format text, with the source location."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Variable:
    id: str
    kind: str
    description: str = ""
    derivative_of: Optional[str] = None


@dataclass(frozen=True)
class Switch:
    """A binary operating condition, e.g. a valve-sign or pressure threshold."""

    id: str
    condition: str


@dataclass(frozen=True)
class RegionGate:
    switch_id: str
    branch: str  # positive | negative | both


@dataclass(frozen=True)
class Constraint:
    id: str
    touches: tuple[str, ...]
    faults: tuple[str, ...]
    gate: Optional[RegionGate] = None
    doc: str = ""


@dataclass(frozen=True)
class SensorSpec:
    """A measurement to add: y = measured (+ own fault unless adds_fault=False)."""

    measured: str
    sensor_name: str
    adds_fault: bool = True


@dataclass(frozen=True)
class StructuralModel:
    name: str
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    switches: tuple[Switch, ...] = ()

    def variable_map(self) -> dict[str, Variable]:
        return {v.id: v for v in self.variables}

    def unknown_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.variables if v.kind == UNKNOWN)

    def known_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.variables if v.kind == KNOWN)

    def fault_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.variables if v.kind == FAULT)

    def switch_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.switches)

    def constraint(self, cid: str) -> Constraint:
        for c in self.constraints:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def constraints_touching(self, var_id: str) -> tuple[Constraint, ...]:
        return tuple(c for c in self.constraints if var_id in c.touches)

    def has_gates(self) -> bool:
        return any(c.gate is not None for c in self.constraints)

    def gated_switch_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.constraints:
            if c.gate is not None and c.gate.switch_id not in seen:
                seen.append(c.gate.switch_id)
        return tuple(seen)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(f"[{v.code}] {v.subject}: {v.message}" for v in self.violations)


# ---------------------------------------------------------------------------
# validation


def validate(model: StructuralModel) -> ValidationReport:
    """Collect every invariant violation; the report is empty iff the model is valid.

    Violations are data, not exceptions: downstream tools decide how to react.
    """
    out: list[Violation] = []
    seen_vars: set[str] = set()
    for v in model.variables:
        if v.id in seen_vars:
            out.append(Violation("duplicate-id", v.id, "variable id declared twice"))
        seen_vars.add(v.id)
        if v.kind not in _KINDS:
            out.append(Violation("bad-kind", v.id, f"unknown kind {v.kind!r}"))
    vmap = model.variable_map()

    seen_sw: set[str] = set()
    for s in model.switches:
        if s.id in seen_sw:
            out.append(Violation("duplicate-id", s.id, "switch id declared twice"))
        seen_sw.add(s.id)
        if s.id in vmap:
            out.append(Violation("duplicate-id", s.id, "switch id collides with a variable id"))

    for v in model.variables:
        if v.derivative_of is None:
            continue
        base = vmap.get(v.derivative_of)
        if base is None:
            out.append(Violation("dangling-ref", v.id, f"deriv_of={v.derivative_of} not declared"))
        elif base.kind != UNKNOWN:
            out.append(Violation("bad-deriv", v.id, f"deriv_of target {base.id} is not unknown"))
        if v.kind != UNKNOWN:
            out.append(Violation("bad-deriv", v.id, "derivative variable must be unknown"))

    seen_c: set[str] = set()
    for c in model.constraints:
        if c.id in seen_c:
            out.append(Violation("duplicate-id", c.id, "constraint id declared twice"))
        seen_c.add(c.id)
        if not c.touches:
            out.append(Violation("empty-touches", c.id, "constraint touches no variable"))
        for t in c.touches:
            if t not in vmap:
                out.append(Violation("dangling-ref", c.id, f"touches undeclared variable {t}"))
        for f in c.faults:
            if f not in c.touches:
                out.append(Violation("bad-fault", c.id, f"fault {f} not among touches"))
            elif f in vmap and vmap[f].kind != FAULT:
                out.append(Violation("bad-fault", c.id, f"{f} touched as fault but declared {vmap[f].kind}"))
        if c.gate is not None:
            if c.gate.switch_id not in seen_sw:
                out.append(Violation("dangling-ref", c.id, f"gate switch {c.gate.switch_id} not declared"))
            if c.gate.branch not in _BRANCHES:
                out.append(Violation("bad-gate", c.id, f"unknown branch {c.gate.branch!r}"))

    touched_faults = {f for c in model.constraints for f in c.faults}
    for v in model.variables:
        if v.kind == FAULT and v.id not in touched_faults:
            out.append(Violation("orphan-fault", v.id, "fault appears in no constraint"))

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# text format
#
#   [switches]    s_xv : "x_v >= 0"
#   [variables]   v_c : unknown deriv_of=x_c  # rod velocity
#   [constraints] c_fb : {v_c, p_p, p_r, F_ext, f_Fr_c}  # force balance
#                 c_qp_pos : {Q_p, x_v, p_s, p_p, f_Q_p} gate=s_xv:+
#
# '#' starts a comment.  Faults are recognised by the declared kind of the
# touched variable, so a constraint line never repeats kind information.


def parse_model(text: str, name: str = "model") -> StructuralModel:
    variables: list[Variable] = []
    switches: list[Switch] = []
    constraints: list[Constraint] = []
    var_ids: set[str] = set()
    switch_ids: set[str] = set()
    constraint_ids: set[str] = set()
    section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line, doc = _split_comment(raw, lineno)
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if stripped not in ("[switches]", "[variables]", "[constraints]"):
                raise ModelFormatError(f"unknown section {stripped}", lineno, raw.index("[") + 1)
            section = stripped[1:-1]
            continue
        if section is None:
            raise ModelFormatError("content before any section header", lineno)
        head, sep, rest = stripped.partition(":")
        if not sep:
            raise ModelFormatError("expected '<id> : ...'", lineno)
        ident = head.strip()
        if not _ID_RE.fullmatch(ident):
            raise ModelFormatError(f"bad identifier {ident!r}", lineno, raw.find(head.strip()) + 1)
        rest = rest.strip()

        if section == "switches":
            if ident in switch_ids or ident in var_ids:
                raise ModelFormatError(f"duplicate id {ident}", lineno)
            m = re.fullmatch(r'"([^"]*)"', rest)
            if not m:
                raise ModelFormatError('switch condition must be a double-quoted string', lineno)
            switch_ids.add(ident)
            switches.append(Switch(ident, m.group(1)))

        elif section == "variables":
            if ident in var_ids or ident in switch_ids:
                raise ModelFormatError(f"duplicate id {ident}", lineno)
            fields = rest.split()
            if not fields or fields[0] not in _KINDS:
                raise ModelFormatError("expected kind unknown|known|fault", lineno)
            kind = fields[0]
            deriv = None
            for extra in fields[1:]:
                key, eq, val = extra.partition("=")
                if key != "deriv_of" or not eq or not _ID_RE.fullmatch(val):
                    raise ModelFormatError(f"unknown key {extra!r} on variable line", lineno)
                deriv = val
            var_ids.add(ident)
            variables.append(Variable(ident, kind, description=doc, derivative_of=deriv))

        else:  # constraints
            if ident in constraint_ids:
                raise ModelFormatError(f"duplicate id {ident}", lineno)
            m = re.match(r"\{([^{}]*)\}\s*(.*)", rest)
            if not m:
                raise ModelFormatError("expected '{var, var, ...}' touch set", lineno)
            touch_ids: list[str] = []
            body = m.group(1).strip()
            if body:
                for tok in body.split(","):
                    tok = tok.strip()
                    if not _ID_RE.fullmatch(tok):
                        raise ModelFormatError(f"bad identifier {tok!r} in touch set", lineno)
                    if tok in touch_ids:
                        raise ModelFormatError(f"variable {tok} repeated in touch set", lineno)
                    touch_ids.append(tok)
            gate = None
            trailer = m.group(2).strip()
            if trailer:
                gm = re.fullmatch(r"gate=([A-Za-z_][A-Za-z0-9_]*):([+-])", trailer)
                if not gm:
                    raise ModelFormatError(f"unknown key {trailer!r} on constraint line", lineno)
                gate = RegionGate(gm.group(1), POSITIVE if gm.group(2) == "+" else NEGATIVE)
            constraint_ids.add(ident)
            constraints.append(Constraint(ident, tuple(touch_ids), (), gate=gate, doc=doc))

    # resolve fault membership and referential integrity now that kinds are known
    kind_of = {v.id: v.kind for v in variables}
    resolved: list[Constraint] = []
    for c in constraints:
        for t in c.touches:
            if t not in kind_of:
                raise ModelFormatError(f"constraint {c.id} touches undeclared variable {t}", _line_of(text, c.id))
        if c.gate is not None and c.gate.switch_id not in switch_ids:
            raise ModelFormatError(f"constraint {c.id} gated on undeclared switch {c.gate.switch_id}", _line_of(text, c.id))
        faults = tuple(t for t in c.touches if kind_of[t] == FAULT)
        resolved.append(replace(c, faults=faults))

    model = StructuralModel(name, tuple(variables), tuple(resolved), tuple(switches))
    report = validate(model)
    if not report.ok:
        raise ModelError(f"parsed model is invalid:\n{report}")
    return model


def _split_comment(raw: str, lineno: int) -> tuple[str, str]:
    """Split off a trailing '# ...' part, honouring double-quoted strings.

    A trailing comment on an entry line is that entry's doc text; whole-line
    comments simply leave empty code behind.
    """
    out = []
    in_quote = False
    doc = ""
    for pos, ch in enumerate(raw):
        if ch == '"':
            in_quote = not in_quote
        if ch == "#" and not in_quote:
            doc = raw[pos + 1:].strip()
            break
        out.append(ch)
    if in_quote:
        raise ModelFormatError("unterminated quote", lineno, raw.find('"') + 1)
    return "".join(out), doc


def _line_of(text: str, ident: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(ident):
            return lineno
    return 0


def serialize_model(model: StructuralModel) -> str:
    """Canonical text form; parse(serialize(m)) reproduces m (modulo docs kept)."""
    lines: list[str] = []
    if model.switches:
        lines.append("[switches]")
        for s in model.switches:
            lines.append(f'{s.id} : "{s.condition}"')
        lines.append("")
    lines.append("[variables]")
    for v in model.variables:
        parts = [f"{v.id} : {v.kind}"]
        if v.derivative_of:
            parts.append(f"deriv_of={v.derivative_of}")
        entry = " ".join(parts)
        if v.description:
            entry += f"  # {v.description}"
        lines.append(entry)
    lines.append("")
    lines.append("[constraints]")
    for c in model.constraints:
        entry = f"{c.id} : {{{', '.join(c.touches)}}}"
        if c.gate is not None:
            mark = "+" if c.gate.branch == POSITIVE else "-"
            entry += f" gate={c.gate.switch_id}:{mark}"
        if c.doc:
            entry += f"  # {c.doc}"
        lines.append(entry)
    lines.append("")
    return "\n".join(lines)


def load_model(path) -> StructuralModel:
    from pathlib import Path

    p = Path(path)
    return parse_model(p.read_text(encoding="utf-8"), name=p.stem)


# ---------------------------------------------------------------------------
# transforms


def add_sensor(model: StructuralModel, spec: SensorSpec) -> StructuralModel:
    """Return a new model with one measurement constraint y = measured.

    Adds a known variable y_<name>, the constraint, and (by default) the
    sensor's own fault variable.  Repeating a sensor name auto-uniquifies,
    so the same physical quantity can be measured twice.
    """
    vmap = model.variable_map()
    target = vmap.get(spec.measured)
    if target is None:
        raise ModelError(f"measured variable {spec.measured} not found")
    if target.kind != UNKNOWN:
        raise ModelError(f"measured variable {spec.measured} is {target.kind}, not unknown")

    taken = set(vmap) | {c.id for c in model.constraints}
    suffix = ""
    n = 1
    while (f"y_{spec.sensor_name}{suffix}" in taken
           or f"c_y_{spec.sensor_name}{suffix}" in taken
           or f"f_y_{spec.sensor_name}{suffix}" in taken):
        n += 1
        suffix = f"_{n}"
    y_id = f"y_{spec.sensor_name}{suffix}"
    c_id = f"c_y_{spec.sensor_name}{suffix}"
    f_id = f"f_y_{spec.sensor_name}{suffix}"

    new_vars = [Variable(y_id, KNOWN, description=f"measurement of {spec.measured}")]
    touches = [y_id, spec.measured]
    faults: tuple[str, ...] = ()
    if spec.adds_fault:
        new_vars.append(Variable(f_id, FAULT, description=f"{spec.sensor_name} sensor fault"))
        touches.append(f_id)
        faults = (f_id,)
    constraint = Constraint(c_id, tuple(touches), faults, doc=f"sensor: {y_id} = {spec.measured}")
    return replace(
        model,
        variables=model.variables + tuple(new_vars),
        constraints=model.constraints + (constraint,),
    )


def specialize_region(model: StructuralModel, assignment: Mapping[str, str]) -> StructuralModel:
    """Keep each gated constraint iff the assignment selects its branch.

    Gates are stripped from the result; the variable set is unchanged.  Every
    switch referenced by some gate must be assigned.
    """
    for sw in model.gated_switch_ids():
        if sw not in assignment:
            raise ModelError(f"assignment misses switch {sw}")
    for sw, branch in assignment.items():
        if branch not in (POSITIVE, NEGATIVE):
            raise ModelError(f"assignment for {sw} must be positive or negative, got {branch!r}")

    kept: list[Constraint] = []
    for c in model.constraints:
        if c.gate is None or c.gate.branch == BOTH:
            kept.append(replace(c, gate=None))
        elif assignment.get(c.gate.switch_id) == c.gate.branch:
            kept.append(replace(c, gate=None))
    remaining = tuple(s for s in model.switches if s.id not in assignment)
    tag = ",".join(f"{sw}{'+' if assignment[sw] == POSITIVE else '-'}" for sw in sorted(assignment))
    return replace(model, name=f"{model.name}[{tag}]", constraints=tuple(kept), switches=remaining)


def condense_gates(model: StructuralModel) -> StructuralModel:
    """Merge each gated branch pair back into its single switching equation.

    Branch constraints share an id stem (``qp_pos`` / ``qp_neg`` -> ``qp``).
    The merged constraint touches the union of the branch touch sets plus the
    variables appearing in the switch condition (the switching function itself
    depends on them).  Gate-free models pass through unchanged.
    """
    if not model.has_gates():
        return model
    vmap = model.variable_map()
    cond_vars: dict[str, tuple[str, ...]] = {
        s.id: tuple(t for t in _ID_RE.findall(s.condition) if t in vmap) for s in model.switches
    }

    merged: list[Constraint] = []
    done: set[str] = set()
    by_id = {c.id: c for c in model.constraints}
    for c in model.constraints:
        if c.id in done:
            continue
        if c.gate is None:
            merged.append(c)
            continue
        stem = _gate_stem(c.id)
        group = [k for k in by_id if _gate_stem(k) == stem and by_id[k].gate is not None
                 and by_id[k].gate.switch_id == c.gate.switch_id]
        members = [by_id[k] for k in sorted(group, key=lambda k: list(by_id).index(k))]
        done.update(g for g in group)
        touches: list[str] = []
        faults: list[str] = []
        for m in members:
            for t in m.touches:
                if t not in touches:
                    touches.append(t)
            for f in m.faults:
                if f not in faults:
                    faults.append(f)
        for t in cond_vars.get(c.gate.switch_id, ()):
            if t not in touches:
                touches.append(t)
        doc = next((m.doc for m in members if m.doc), "")
        merged.append(Constraint(stem, tuple(touches), tuple(faults), doc=doc))
    return replace(model, name=model.name, constraints=tuple(merged), switches=())


def _gate_stem(cid: str) -> str:
    for suffix in ("_pos", "_neg"):
        if cid.endswith(suffix):
            return cid[: -len(suffix)]
    return cid


def expand_differential(model: StructuralModel) -> StructuralModel:
    """Add a differential constraint d_<x> : {xdot, x} for every derivative pair.

    Idempotent: pairs that already have their differential constraint are left
    alone, so applying twice equals applying once.
    """
    existing = {c.id for c in model.constraints}
    added: list[Constraint] = []
    for v in model.variables:
        if v.derivative_of is None:
            continue
        cid = f"d_{v.derivative_of}"
        if cid in existing:
            continue
        added.append(Constraint(cid, (v.id, v.derivative_of), (),
                                doc=f"differential: {v.id} = d/dt {v.derivative_of}"))
        existing.add(cid)
    if not added:
        return model
    return replace(model, constraints=model.constraints + tuple(added))
