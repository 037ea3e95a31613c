"""Operating-region enumeration and cross-region diagnosis sweeps.

Each declared switch is binary, so a model with k switches has 2^k operating
regions.  The sweep specializes the model per region, builds the isolability
matrix of each, and checks whether the diagnosis pattern is invariant across
all of them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .diagnosis import Diff, IsolabilityMatrix, compare_matrices, isolability_matrix
from .structmodel import NEGATIVE, POSITIVE, StructuralModel, specialize_region

Assignment = dict[str, str]


def enumerate_regions(model: StructuralModel) -> list[Assignment]:
    """All 2^k branch assignments; switches sorted by id, negative before positive."""
    switches = sorted(model.switch_ids())
    out = []
    for branches in itertools.product((NEGATIVE, POSITIVE), repeat=len(switches)):
        out.append(dict(zip(switches, branches)))
    return out


@dataclass(frozen=True)
class RegionSweepResult:
    assignments: tuple[Assignment, ...]
    matrices: tuple[IsolabilityMatrix, ...]
    invariant: bool
    diffs: tuple[tuple[tuple[int, int], Diff], ...]  # ((ref index, index), diff)
    whole_model_matrix: IsolabilityMatrix
    whole_model_superset: bool  # whole-model detectability covers every region's

    def region_tag(self, idx: int) -> str:
        a = self.assignments[idx]
        return ",".join(f"{sw}{'+' if a[sw] == POSITIVE else '-'}" for sw in sorted(a))


def sweep_regions(model: StructuralModel) -> RegionSweepResult:
    """Specialize per region, diagnose, and compare every pattern to the first.

    Pairwise emptiness of pattern diffs is equivalent to all-vs-first
    emptiness, so only those diffs are materialized.
    """
    assignments = enumerate_regions(model)
    matrices = []
    for a in assignments:
        matrices.append(isolability_matrix(specialize_region(model, a)))
    diffs = []
    for idx in range(1, len(matrices)):
        diffs.append(((0, idx), compare_matrices(matrices[0], matrices[idx])))
    invariant = all(d.empty for _, d in diffs)

    whole = isolability_matrix(model)
    whole_det = set(whole.detectable)
    superset = all(set(m.detectable) <= whole_det for m in matrices)
    return RegionSweepResult(
        assignments=tuple(assignments),
        matrices=tuple(matrices),
        invariant=invariant,
        diffs=tuple(diffs),
        whole_model_matrix=whole,
        whole_model_superset=superset,
    )
