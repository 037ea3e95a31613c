"""Independent brute-force oracles for the graph machinery.

Maximum matching here is bitmask dynamic programming over the right vertex
set, and over-part membership uses the classical characterization that a
constraint sits in the over-determined part iff removing it does not reduce
the maximum matching size.  Nothing in this file touches the Hopcroft-Karp /
alternating-flood implementation under test.
"""

from __future__ import annotations

from functools import lru_cache

from structfdi.graphcore import Bipartite
from structfdi.structmodel import StructuralModel, condense_gates, expand_differential


def matching_size(g: Bipartite) -> int:
    index = {v: i for i, v in enumerate(g.right)}
    masks = tuple(sum(1 << index[v] for v in adj) for adj in g.edges)

    @lru_cache(maxsize=None)
    def go(i: int, used: int) -> int:
        if i == len(masks):
            return 0
        best = go(i + 1, used)
        avail = masks[i] & ~used
        while avail:
            bit = avail & -avail
            avail ^= bit
            best = max(best, 1 + go(i + 1, used | bit))
        return best

    result = go(0, 0)
    go.cache_clear()
    return result


def over_constraints(g: Bipartite) -> set[str]:
    """c is over-determined iff some maximum matching leaves it unmatched,
    i.e. deleting c keeps the maximum matching size."""
    full = matching_size(g)
    return {c for c in g.left if matching_size(g.without_left([c])) == full}


def _structure(model: StructuralModel):
    m = condense_gates(expand_differential(model))
    unknowns = m.unknown_ids()
    uset = set(unknowns)
    left = tuple(c.id for c in m.constraints)
    edges = tuple(tuple(t for t in c.touches if t in uset) for c in m.constraints)
    g = Bipartite(left, unknowns, edges)
    hosts = {f: {c.id for c in m.constraints if f in c.faults} for f in m.fault_ids()}
    return g, hosts


def detectable(model: StructuralModel, fault: str) -> bool:
    g, hosts = _structure(model)
    return bool(hosts[fault] & over_constraints(g))


def detectable_set(model: StructuralModel) -> frozenset[str]:
    g, hosts = _structure(model)
    over = over_constraints(g)
    return frozenset(f for f, hs in hosts.items() if hs & over)


def isolable(model: StructuralModel, fi: str, fj: str) -> bool:
    g, hosts = _structure(model)
    pruned = g.without_left(hosts[fj])
    return bool(hosts[fi] & over_constraints(pruned))
