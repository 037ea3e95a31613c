"""Search over candidate sensor subsets for minimal configurations that meet
detectability / isolability targets.

The search enumerates subsets in nondecreasing (cost, size) order from a
heap, so the first time a subset meets the target no cheaper subset can exist
below it; supersets of found solutions are pruned, and branches are cut when
even the remaining closure cannot satisfy the detection requirements
(detectability grows monotonically with sensors, isolability is never
pruned, only re-evaluated).  Beyond 20 candidates a greedy fallback runs and
the result is flagged non-optimal.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import graphcore
from .diagnosis import IsolabilityMatrix, isolability_matrix
from .structmodel import (
    ModelError,
    ModelFormatError,
    SensorSpec,
    StructuralModel,
    add_sensor,
    condense_gates,
    expand_differential,
)

EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class CatalogEntry:
    spec: SensorSpec
    cost: float


@dataclass(frozen=True)
class SensorCatalog:
    candidates: tuple[CatalogEntry, ...]

    def __post_init__(self):
        names = [e.spec.sensor_name for e in self.candidates]
        if len(set(names)) != len(names):
            raise ModelError("catalog sensor names must be unique")
        for e in self.candidates:
            if e.cost <= 0:
                raise ModelError(f"sensor {e.spec.sensor_name} must have positive cost")

    def entry(self, name: str) -> CatalogEntry:
        for e in self.candidates:
            if e.spec.sensor_name == name:
                return e
        raise KeyError(name)


@dataclass(frozen=True)
class PlacementTarget:
    must_detect: frozenset[str]
    must_isolate: frozenset[frozenset[str]]  # unordered pairs, both directions required

    @staticmethod
    def of(detect: Iterable[str] = (), isolate: Iterable[tuple[str, str]] = ()) -> "PlacementTarget":
        pairs = frozenset(frozenset(p) for p in isolate)
        for p in pairs:
            if len(p) != 2:
                raise ModelError(f"isolation pair must name two distinct faults, got {sorted(p)}")
        return PlacementTarget(frozenset(detect), pairs)

    def check_faults(self, model: StructuralModel) -> None:
        known = set(model.fault_ids())
        referenced = set(self.must_detect) | {f for p in self.must_isolate for f in p}
        missing = sorted(referenced - known)
        if missing:
            raise ModelError(f"target references unknown faults: {', '.join(missing)}")


@dataclass(frozen=True)
class ConfigSummary:
    sensors: tuple[str, ...]
    detectable: frozenset[str]
    matrix: IsolabilityMatrix
    model: StructuralModel


@dataclass(frozen=True)
class PlacementResult:
    chosen: tuple[tuple[tuple[str, ...], float], ...]  # (sensor names, cost), minimal first
    achieved: tuple[ConfigSummary, ...]
    feasible: bool
    unmet: tuple[str, ...]
    exhaustive: bool
    warning: str = ""


def apply_sensors(model: StructuralModel, entries: Sequence[CatalogEntry],
                  sensor_faults: bool = True) -> StructuralModel:
    out = model
    for e in sorted(entries, key=lambda e: e.spec.sensor_name):
        spec = e.spec if sensor_faults else SensorSpec(e.spec.measured, e.spec.sensor_name, False)
        out = add_sensor(out, spec)
    return out


def evaluate_config(model: StructuralModel, entries: Sequence[CatalogEntry],
                    sensor_faults: bool = True) -> ConfigSummary:
    """Diagnose the model with the given sensor subset installed."""
    extended = apply_sensors(model, entries, sensor_faults)
    matrix = isolability_matrix(extended)
    return ConfigSummary(
        sensors=tuple(sorted(e.spec.sensor_name for e in entries)),
        detectable=frozenset(matrix.detectable),
        matrix=matrix,
        model=extended,
    )


class _Evaluator:
    """Detect/isolate checks on base-model faults, one DM per query."""

    def __init__(self, model: StructuralModel, target: PlacementTarget, sensor_faults: bool):
        self.model = model
        self.target = target
        self.sensor_faults = sensor_faults

    def _structure(self, entries):
        m = condense_gates(expand_differential(apply_sensors(self.model, entries, self.sensor_faults)))
        g = graphcore.from_model(m)
        hosts = {f: tuple(c.id for c in m.constraints if f in c.faults) for f in m.fault_ids()}
        return g, hosts

    def detect_ok(self, entries) -> tuple[bool, list[str]]:
        g, hosts = self._structure(entries)
        over = graphcore.over_part_constraints(g)
        missing = sorted(f for f in self.target.must_detect
                         if not any(c in over for c in hosts[f]))
        return not missing, missing

    def unmet(self, entries) -> list[str]:
        g, hosts = self._structure(entries)
        over = graphcore.over_part_constraints(g)
        out = [f"detect {f}" for f in sorted(self.target.must_detect)
               if not any(c in over for c in hosts[f])]
        for pair in sorted(self.target.must_isolate, key=sorted):
            a, b = sorted(pair)
            ok = True
            for i, j in ((a, b), (b, a)):
                surviving = graphcore.over_part_constraints(g.without_left(hosts[j]))
                if not any(c in surviving for c in hosts[i]):
                    ok = False
            if not ok:
                out.append(f"isolate {a}/{b}")
        return out

    def meets(self, entries) -> bool:
        return not self.unmet(entries)


def minimal_sensor_sets(model: StructuralModel, catalog: SensorCatalog,
                        target: PlacementTarget, sensor_faults: bool = True,
                        max_subset_size: Optional[int] = None) -> PlacementResult:
    """All minimal sensor subsets meeting the target, sorted by (cost, size).

    Infeasible targets yield feasible=False with the unmet requirements of the
    full catalog, never an exception.
    """
    target.check_faults(model)
    ev = _Evaluator(model, target, sensor_faults)
    n = len(catalog.candidates)

    if n > EXHAUSTIVE_LIMIT:
        return _greedy_fallback(ev, catalog, max_subset_size)

    costs = [e.cost for e in catalog.candidates]
    solutions: list[tuple[int, ...]] = []

    def entries_of(idx: tuple[int, ...]):
        return [catalog.candidates[i] for i in idx]

    # heap of (cost, size, index tuple); indices strictly increasing per tuple
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, ())]
    while heap:
        cost, size, idx = heapq.heappop(heap)
        if any(set(s) <= set(idx) for s in solutions):
            continue  # superset of a minimal solution: neither minimal nor expandable
        if ev.meets(entries_of(idx)):
            solutions.append(idx)
            continue
        if max_subset_size is not None and size >= max_subset_size:
            continue
        last = idx[-1] if idx else -1
        closure = idx + tuple(range(last + 1, n))
        if closure != idx and not ev.detect_ok(entries_of(closure))[0]:
            continue  # monotone: no descendant can satisfy must_detect
        for nxt in range(last + 1, n):
            heapq.heappush(heap, (cost + costs[nxt], size + 1, idx + (nxt,)))

    if not solutions:
        unmet = ev.unmet(list(catalog.candidates))
        return PlacementResult((), (), False, tuple(unmet), True)

    chosen = []
    achieved = []
    for idx in solutions:
        entries = entries_of(idx)
        names = tuple(sorted(e.spec.sensor_name for e in entries))
        chosen.append((names, sum(e.cost for e in entries)))
        achieved.append(evaluate_config(model, entries, sensor_faults))
        assert ev.meets(entries), "solution must re-verify against the target"
    order = sorted(range(len(chosen)), key=lambda k: (chosen[k][1], len(chosen[k][0]), chosen[k][0]))
    return PlacementResult(
        chosen=tuple(chosen[k] for k in order),
        achieved=tuple(achieved[k] for k in order),
        feasible=True,
        unmet=(),
        exhaustive=True,
    )


def _greedy_fallback(ev: _Evaluator, catalog: SensorCatalog,
                     max_subset_size: Optional[int]) -> PlacementResult:
    chosen: list[CatalogEntry] = []
    remaining = list(catalog.candidates)
    unmet = ev.unmet(chosen)
    while unmet and remaining:
        if max_subset_size is not None and len(chosen) >= max_subset_size:
            break
        scored = []
        for e in remaining:
            now = ev.unmet(chosen + [e])
            gain = len(unmet) - len(now)
            scored.append((gain / e.cost, gain, -e.cost, e.spec.sensor_name, e, now))
        scored.sort(reverse=True)
        best = scored[0]
        if best[1] <= 0:
            break
        chosen.append(best[4])
        remaining.remove(best[4])
        unmet = best[5]
    if unmet:
        return PlacementResult((), (), False, tuple(ev.unmet(list(catalog.candidates))), False,
                               warning="greedy search (catalog above exhaustive limit)")
    names = tuple(sorted(e.spec.sensor_name for e in chosen))
    summary = evaluate_config(ev.model, chosen, ev.sensor_faults)
    return PlacementResult(
        chosen=((names, sum(e.cost for e in chosen)),),
        achieved=(summary,),
        feasible=True,
        unmet=(),
        exhaustive=False,
        warning="greedy search (catalog above exhaustive limit): result may be non-minimal",
    )


# ---------------------------------------------------------------------------
# sidecar file format
#
#   [catalog]
#   pp1 : measures=p_p1 cost=1.0 adds_fault=true
#   [target]
#   detect : {f_Q_le_p, f_B_e}
#   isolate : {f_Q_le_p/f_Q_li}

_ID = r"[A-Za-z_][A-Za-z0-9_]*"


def load_catalog(text: str, model: StructuralModel) -> SensorCatalog:
    entries: list[CatalogEntry] = []
    for lineno, line in _section_lines(text, "catalog"):
        head, sep, rest = line.partition(":")
        name = head.strip()
        if not sep or not re.fullmatch(_ID, name):
            raise ModelFormatError("expected '<name> : measures=<var> cost=<x>'", lineno)
        measured = None
        cost = None
        adds_fault = True
        for tok in rest.split():
            key, eq, val = tok.partition("=")
            if key == "measures" and eq:
                measured = val
            elif key == "cost" and eq:
                cost = float(val)
            elif key == "adds_fault" and eq and val in ("true", "false"):
                adds_fault = val == "true"
            else:
                raise ModelFormatError(f"unknown key {tok!r} on catalog line", lineno)
        if measured is None or cost is None:
            raise ModelFormatError("catalog line needs measures= and cost=", lineno)
        if measured not in {v.id for v in model.variables}:
            raise ModelFormatError(f"catalog measures undeclared variable {measured}", lineno)
        entries.append(CatalogEntry(SensorSpec(measured, name, adds_fault), cost))
    return SensorCatalog(tuple(entries))


def load_target(text: str, model: StructuralModel) -> PlacementTarget:
    detect: set[str] = set()
    isolate: set[tuple[str, str]] = set()
    for lineno, line in _section_lines(text, "target"):
        head, sep, rest = line.partition(":")
        kind = head.strip()
        body = rest.strip()
        m = re.fullmatch(r"\{([^{}]*)\}", body)
        if not sep or kind not in ("detect", "isolate") or not m:
            raise ModelFormatError("expected 'detect : {...}' or 'isolate : {...}'", lineno)
        items = [x.strip() for x in m.group(1).split(",") if x.strip()]
        if kind == "detect":
            detect.update(items)
        else:
            for item in items:
                a, slash, b = item.partition("/")
                if not slash or not a.strip() or not b.strip() or a.strip() == b.strip():
                    raise ModelFormatError(f"bad isolation pair {item!r}", lineno)
                isolate.add((a.strip(), b.strip()))
    target = PlacementTarget.of(detect, isolate)
    target.check_faults(model)
    return target


def _section_lines(text: str, section: str):
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            current = line.strip("[]")
            continue
        if current == section:
            yield lineno, line
