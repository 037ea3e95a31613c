"""Bipartite graph machinery: maximum matching, Dulmage-Mendelsohn decomposition,
and equivalence classes of the over-determined part.

The graph always has constraints on the left and unknown variables on the
right; faults and known variables never enter it.  Everything here is
deterministic for a given declaration order: Hopcroft-Karp visits vertices in
input order, and the DM partition itself is a canonical object independent of
which maximum matching was found.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .structmodel import UNKNOWN, StructuralModel

_INF = -1


@dataclass(frozen=True)
class Bipartite:
    left: tuple[str, ...]                 # constraint ids
    right: tuple[str, ...]                # unknown variable ids
    edges: tuple[tuple[str, ...], ...]    # per left vertex, adjacent right vertices

    def __post_init__(self):
        rset = set(self.right)
        if len(self.left) != len(self.edges):
            raise ValueError("edges must align with left vertices")
        for lid, adj in zip(self.left, self.edges):
            if len(set(adj)) != len(adj):
                raise ValueError(f"duplicate edge on {lid}")
            for r in adj:
                if r not in rset:
                    raise ValueError(f"edge {lid} -> {r} references undeclared right vertex")

    def adjacency(self) -> dict[str, tuple[str, ...]]:
        return dict(zip(self.left, self.edges))

    def without_left(self, drop: Iterable[str]) -> "Bipartite":
        gone = set(drop)
        kept = [(l, adj) for l, adj in zip(self.left, self.edges) if l not in gone]
        return Bipartite(tuple(l for l, _ in kept), self.right, tuple(adj for _, adj in kept))


def from_model(model: StructuralModel) -> Bipartite:
    """Incidence over unknowns only; declaration order fixes determinism."""
    unknowns = model.unknown_ids()
    uset = set(unknowns)
    left = tuple(c.id for c in model.constraints)
    edges = tuple(tuple(t for t in c.touches if t in uset) for c in model.constraints)
    return Bipartite(left, unknowns, edges)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[str, str], ...]  # (constraint, variable)

    def __len__(self) -> int:
        return len(self.pairs)

    def by_constraint(self) -> dict[str, str]:
        return {c: v for c, v in self.pairs}

    def by_variable(self) -> dict[str, str]:
        return {v: c for c, v in self.pairs}


def max_matching(g: Bipartite) -> Matching:
    """Hopcroft-Karp maximum matching.

    Layered BFS from free left vertices, then vertex-disjoint augmenting DFS
    passes, O(E sqrt(V)).  Lists instead of sets keep the result identical for
    a given input ordering.
    """
    adj = {l: list(a) for l, a in zip(g.left, g.edges)}
    pair_l: dict[str, str] = {}
    pair_r: dict[str, str] = {}
    dist: dict[str, int] = {}

    def bfs() -> bool:
        q: deque[str] = deque()
        for l in g.left:
            if l not in pair_l:
                dist[l] = 0
                q.append(l)
            else:
                dist[l] = _INF
        reached_free = False
        while q:
            l = q.popleft()
            for r in adj[l]:
                other = pair_r.get(r)
                if other is None:
                    reached_free = True
                elif dist[other] == _INF:
                    dist[other] = dist[l] + 1
                    q.append(other)
        return reached_free

    def dfs(l: str) -> bool:
        for r in adj[l]:
            other = pair_r.get(r)
            if other is None or (dist.get(other) == dist[l] + 1 and dfs(other)):
                pair_l[l] = r
                pair_r[r] = l
                return True
        dist[l] = _INF
        return False

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * (len(g.left) + len(g.right)) + 100))
    try:
        while bfs():
            for l in g.left:
                if l not in pair_l:
                    dfs(l)
    finally:
        sys.setrecursionlimit(old_limit)

    return Matching(tuple((l, pair_l[l]) for l in g.left if l in pair_l))


@dataclass(frozen=True)
class DmDecomposition:
    """Canonical three-part split of a bipartite structure.

    under: unmatched variables plus everything alternating-reachable from them;
    over: unmatched constraints plus everything alternating-reachable from them;
    just: the exactly-determined remainder, reported as matched pairs.
    classes, when computed, partitions the over-part constraints.
    """

    under_constraints: tuple[str, ...]
    under_variables: tuple[str, ...]
    just_pairs: tuple[tuple[str, str], ...]
    over_constraints: tuple[str, ...]
    over_variables: tuple[str, ...]
    matching: Matching
    classes: Optional[tuple[tuple[str, ...], ...]] = None

    @property
    def just_constraints(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.just_pairs)

    @property
    def just_variables(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.just_pairs)

    def part_of_constraint(self, cid: str) -> str:
        if cid in self.over_constraints:
            return "over"
        if cid in self.under_constraints:
            return "under"
        return "just"


def dm_decompose(g: Bipartite) -> DmDecomposition:
    m = max_matching(g)
    over_c, over_v, under_c, under_v = _dm_parts(g, m)
    by_c = m.by_constraint()
    just = tuple(
        (c, by_c[c])
        for c in g.left
        if c in by_c and c not in over_c and c not in under_c
    )
    order_c = {c: i for i, c in enumerate(g.left)}
    order_v = {v: i for i, v in enumerate(g.right)}
    return DmDecomposition(
        under_constraints=tuple(sorted(under_c, key=order_c.get)),
        under_variables=tuple(sorted(under_v, key=order_v.get)),
        just_pairs=just,
        over_constraints=tuple(sorted(over_c, key=order_c.get)),
        over_variables=tuple(sorted(over_v, key=order_v.get)),
        matching=m,
    )


def _dm_parts(g: Bipartite, m: Matching) -> tuple[set, set, set, set]:
    adj = g.adjacency()
    by_c = m.by_constraint()
    by_v = m.by_variable()

    # over: flood from unmatched constraints; constraint -> any incident
    # variable, variable -> its matched constraint.
    over_c = {c for c in g.left if c not in by_c}
    over_v: set[str] = set()
    stack = list(over_c)
    while stack:
        c = stack.pop()
        for v in adj[c]:
            if v in over_v:
                continue
            over_v.add(v)
            nxt = by_v.get(v)
            if nxt is not None and nxt not in over_c:
                over_c.add(nxt)
                stack.append(nxt)

    # under: flood from unmatched variables; variable -> any incident
    # constraint, constraint -> its matched variable.
    touching: dict[str, list[str]] = {v: [] for v in g.right}
    for c in g.left:
        for v in adj[c]:
            touching[v].append(c)
    under_v = {v for v in g.right if v not in by_v}
    under_c: set[str] = set()
    stack = list(under_v)
    while stack:
        v = stack.pop()
        for c in touching[v]:
            if c in under_c:
                continue
            under_c.add(c)
            nxt = by_c.get(c)
            if nxt is not None and nxt not in under_v:
                under_v.add(nxt)
                stack.append(nxt)

    return over_c, over_v, under_c, under_v


def over_part_constraints(g: Bipartite) -> set[str]:
    """Just the over-determined constraint set; cheaper entry point for loops."""
    m = max_matching(g)
    over_c, _, _, _ = _dm_parts(g, m)
    return over_c


def equivalence_classes(g: Bipartite, dm: DmDecomposition) -> tuple[tuple[str, ...], ...]:
    """Partition the over-part constraints into redundancy equivalence classes.

    Two over-part constraints are equivalent iff removing one expels the other
    from the over-determined part.  Computed by re-running the decomposition
    with each representative removed; O(|over|) matchings, plenty fast for the
    model sizes this toolkit targets (tens of constraints).
    """
    over = list(dm.over_constraints)
    over_set = set(over)
    classes: list[tuple[str, ...]] = []
    assigned: set[str] = set()
    for c in over:
        if c in assigned:
            continue
        remaining = over_part_constraints(g.without_left([c]))
        members = tuple(x for x in over if x == c or (x in over_set and x not in remaining))
        classes.append(members)
        assigned.update(members)
    return tuple(classes)


def with_classes(g: Bipartite, dm: DmDecomposition) -> DmDecomposition:
    return replace(dm, classes=equivalence_classes(g, dm))


# ---------------------------------------------------------------------------
# exports

_PART_COLOR = {"over": "#d6604d", "just": "#bababa", "under": "#4393c3"}


def incidence_csv(g: Bipartite) -> str:
    """0/1 incidence matrix, rows = constraints, cols = unknown variables."""
    rows = ["constraint," + ",".join(g.right)]
    for l, adj in zip(g.left, g.edges):
        present = set(adj)
        rows.append(l + "," + ",".join("1" if v in present else "0" for v in g.right))
    return "\n".join(rows) + "\n"


def dot_export(g: Bipartite, dm: Optional[DmDecomposition] = None, fine_blocks: bool = False) -> str:
    """Graphviz source for the bipartite structure, DM parts coloured.

    With fine_blocks=True the just part is grouped into the strongly connected
    components of the matched digraph (display only; diagnosis never needs the
    fine ordering).
    """
    if dm is None:
        dm = dm_decompose(g)
    part_c = {c: dm.part_of_constraint(c) for c in g.left}
    part_v: dict[str, str] = {}
    for v in g.right:
        if v in dm.over_variables:
            part_v[v] = "over"
        elif v in dm.under_variables:
            part_v[v] = "under"
        else:
            part_v[v] = "just"

    lines = ["graph structure {", "  rankdir=LR;", "  node [style=filled];"]
    for c in g.left:
        lines.append(f'  "c:{c}" [shape=box, label="{c}", fillcolor="{_PART_COLOR[part_c[c]]}"];')
    for v in g.right:
        lines.append(f'  "v:{v}" [shape=ellipse, label="{v}", fillcolor="{_PART_COLOR[part_v[v]]}"];')
    matched = set(dm.matching.pairs)
    for c, adj in zip(g.left, g.edges):
        for v in adj:
            style = " [penwidth=2]" if (c, v) in matched else ""
            lines.append(f'  "c:{c}" -- "v:{v}"{style};')
    if fine_blocks:
        for i, block in enumerate(_just_blocks(g, dm), start=1):
            names = " ".join(f'"c:{c}" "v:{v}"' for c, v in block)
            lines.append(f"  subgraph cluster_just_{i} {{ label=\"block {i}\"; {names} }}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _just_blocks(g: Bipartite, dm: DmDecomposition) -> list[list[tuple[str, str]]]:
    """SCCs of the just part's matched digraph, in dependency order."""
    pairs = list(dm.just_pairs)
    by_v = {v: c for c, v in pairs}
    just_c = {c for c, _ in pairs}
    adj = g.adjacency()
    succ: dict[str, list[str]] = {c: [] for c in just_c}
    for c, _v in pairs:
        for w in adj[c]:
            o = by_v.get(w)
            if o is not None and o != c:
                succ[c].append(o)

    # Tarjan, iterative
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = [0]

    def strongconnect(root: str):
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)

    for c, _ in pairs:
        if c not in index:
            strongconnect(c)
    matched = dict(pairs)
    return [[(c, matched[c]) for c in sorted(comp, key=g.left.index)] for comp in sccs]
