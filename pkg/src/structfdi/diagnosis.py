"""Fault detectability and pairwise isolability from DM decompositions.

A fault is structurally detectable iff some constraint touching it lies in
the over-determined part.  Fault i is isolable from fault j iff i stays
detectable after every constraint touching j is removed; mutually
non-isolable faults show up as filled blocks around the diagonal of the
isolability matrix, exactly as in the benchmark figures.

All operations accept gated models and analyse their condensed (whole-model)
structure; specialize first if a single operating region is wanted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from . import graphcore
from .structmodel import ModelError, StructuralModel, condense_gates, expand_differential


@dataclass(frozen=True)
class FaultVerdict:
    fault: str
    detectable: bool
    class_id: Optional[str] = None


@dataclass(frozen=True)
class IsolabilityMatrix:
    """Boolean fault-by-fault matrix; cell (i, j) set means fault j is
    diagnosed (cannot be exonerated) when fault i occurs."""

    faults: tuple[str, ...]
    cells: tuple[tuple[bool, ...], ...]
    detectable: tuple[str, ...]

    def cell(self, fi: str, fj: str) -> bool:
        return self.cells[self.faults.index(fi)][self.faults.index(fj)]

    def blocks(self) -> tuple[tuple[str, ...], ...]:
        """Groups of mutually non-isolable detectable faults (incl. singletons)."""
        det = set(self.detectable)
        out: list[tuple[str, ...]] = []
        seen: set[str] = set()
        for f in self.faults:
            if f not in det or f in seen:
                continue
            grp = tuple(g for g in self.faults
                        if g in det and (g == f or (self.cell(f, g) and self.cell(g, f))))
            out.append(grp)
            seen.update(grp)
        return tuple(out)

    def to_text(self) -> str:
        width = max(len(f) for f in self.faults)
        lines = [" " * (width + 2) + " ".join(f"{j:>2d}" for j in range(len(self.faults)))]
        for i, fi in enumerate(self.faults):
            row = " ".join(" X" if v else " ." for v in self.cells[i])
            lines.append(f"{fi:<{width}} {i:>2d} {row}")
        lines.append("")
        lines.append("legend: row fault occurs, X marks column faults that cannot be exonerated")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["fault," + ",".join(self.faults)]
        for f, row in zip(self.faults, self.cells):
            rows.append(f + "," + ",".join("1" if v else "0" for v in row))
        return "\n".join(rows) + "\n"

    def pattern_key(self) -> tuple:
        """Cells in canonical (sorted-fault) order; equal keys = equal patterns."""
        order = sorted(range(len(self.faults)), key=lambda k: self.faults[k])
        return tuple(self.cells[i][j] for i in order for j in order)


@dataclass(frozen=True)
class Diff:
    entries: tuple[tuple[str, str, bool, bool], ...]  # (fault_i, fault_j, in_a, in_b)

    @property
    def empty(self) -> bool:
        return not self.entries

    def __len__(self) -> int:
        return len(self.entries)


class _Analysis:
    """Condensed structural view of a model plus the cached base decomposition."""

    def __init__(self, model: StructuralModel):
        self.model = condense_gates(expand_differential(model))
        self.graph = graphcore.from_model(self.model)
        self.faults = self.model.fault_ids()
        self.hosts = {f: tuple(c.id for c in self.model.constraints if f in c.faults)
                      for f in self.faults}
        self.dm = graphcore.dm_decompose(self.graph)
        self._over = set(self.dm.over_constraints)
        self._classes: Optional[tuple[tuple[str, ...], ...]] = None

    def detectable(self, fault: str) -> bool:
        return any(c in self._over for c in self.hosts[fault])

    def over_after_deleting(self, fault: str) -> set[str]:
        return graphcore.over_part_constraints(self.graph.without_left(self.hosts[fault]))

    def classes(self) -> tuple[tuple[str, ...], ...]:
        if self._classes is None:
            self._classes = graphcore.equivalence_classes(self.graph, self.dm)
        return self._classes

    def class_tag_of(self, fault: str) -> Optional[str]:
        tags = []
        for k, members in enumerate(self.classes(), start=1):
            if any(c in members for c in self.hosts[fault]):
                tags.append(f"C{k}")
        if not tags:
            return None
        return "+".join(tags)


def detectable_faults(model: StructuralModel) -> list[FaultVerdict]:
    a = _Analysis(model)
    out = []
    for f in a.faults:
        det = a.detectable(f)
        out.append(FaultVerdict(f, det, a.class_tag_of(f) if det else None))
    return out


def isolable(model: StructuralModel, fi: str, fj: str) -> bool:
    """True iff fi stays detectable once every constraint touching fj is removed."""
    if fi == fj:
        raise ModelError("isolable() requires two distinct faults")
    a = _Analysis(model)
    for f in (fi, fj):
        if f not in a.hosts:
            raise ModelError(f"unknown fault {f}")
    surviving = a.over_after_deleting(fj)
    return any(c in surviving for c in a.hosts[fi])


def isolability_matrix(model: StructuralModel) -> IsolabilityMatrix:
    a = _Analysis(model)
    det = {f: a.detectable(f) for f in a.faults}

    # one decomposition per column fault, shared across all rows
    surviving = {j: a.over_after_deleting(j) for j in a.faults}

    def reject(i: str, j: str) -> bool:
        # cell(i, j): fault j cannot be exonerated when fault i occurs
        if not det[i]:
            return False
        if i == j:
            return True
        return not any(c in surviving[j] for c in a.hosts[i])

    ordered = _block_order(a.faults, det, reject)
    cells = tuple(tuple(reject(i, j) for j in ordered) for i in ordered)
    return IsolabilityMatrix(ordered, cells, tuple(f for f in ordered if det[f]))


def _block_order(faults, det, reject) -> tuple[str, ...]:
    """Detectable faults grouped so mutual non-isolability blocks are contiguous
    (connected components of the mutual relation), groups and members sorted;
    undetectable faults go last, row-wise distinguishable by their empty rows."""
    detectable = sorted(f for f in faults if det[f])
    adj = {f: [g for g in detectable if g != f and reject(f, g) and reject(g, f)]
           for f in detectable}
    groups: list[list[str]] = []
    seen: set[str] = set()
    for f in detectable:
        if f in seen:
            continue
        comp, stack = [], [f]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            comp.append(x)
            stack.extend(adj[x])
        groups.append(sorted(comp))
    groups.sort(key=lambda grp: grp[0])
    ordered = [f for grp in groups for f in grp]
    ordered.extend(sorted(f for f in faults if not det[f]))
    return tuple(ordered)


def compare_matrices(a: IsolabilityMatrix, b: IsolabilityMatrix) -> Diff:
    """Pattern difference after aligning both matrices on sorted fault ids."""
    if set(a.faults) != set(b.faults):
        raise ModelError("isolability matrices cover different fault sets")
    order = sorted(a.faults)
    ia = {f: a.faults.index(f) for f in order}
    ib = {f: b.faults.index(f) for f in order}
    entries = []
    for fi in order:
        for fj in order:
            va = a.cells[ia[fi]][ia[fj]]
            vb = b.cells[ib[fi]][ib[fj]]
            if va != vb:
                entries.append((fi, fj, va, vb))
    return Diff(tuple(entries))


def diagnosis_report(model: StructuralModel) -> dict:
    """JSON-ready summary: DM part sizes, per-fault verdicts, isolability."""
    a = _Analysis(model)
    matrix = isolability_matrix(model)
    verdicts = detectable_faults(model)
    per_fault = []
    for v in verdicts:
        isolable_from = [j for j in matrix.faults
                         if j != v.fault and v.detectable and not matrix.cell(v.fault, j)]
        per_fault.append({
            "fault": v.fault,
            "detectable": v.detectable,
            "class": v.class_id,
            "isolable_from": isolable_from,
        })
    return {
        "model": model.name,
        "constraints": len(a.model.constraints),
        "unknowns": len(a.graph.right),
        "dm": {
            "under": {"constraints": list(a.dm.under_constraints),
                      "variables": list(a.dm.under_variables)},
            "just": {"pairs": [list(p) for p in a.dm.just_pairs]},
            "over": {"constraints": list(a.dm.over_constraints),
                     "variables": list(a.dm.over_variables)},
        },
        "faults": per_fault,
        "blocks": [list(b) for b in matrix.blocks()],
        "matrix": {"faults": list(matrix.faults),
                   "cells": [[int(v) for v in row] for row in matrix.cells]},
    }


def report_json(model: StructuralModel) -> str:
    return json.dumps(diagnosis_report(model), indent=2) + "\n"
