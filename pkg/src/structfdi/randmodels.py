"""Seeded random structural models and bipartite graphs.

Used by the test suite to fuzz the matching / decomposition / isolability
machinery against brute-force oracles; all draws go through a caller-supplied
seed so failures replay exactly.
"""

from __future__ import annotations

import numpy as np

from .graphcore import Bipartite
from .structmodel import FAULT, KNOWN, UNKNOWN, Constraint, StructuralModel, Variable


def random_bipartite(rng: np.random.Generator, max_left: int = 8, max_right: int = 8,
                     p_edge: float = 0.35) -> Bipartite:
    n_l = int(rng.integers(0, max_left + 1))
    n_r = int(rng.integers(0, max_right + 1))
    left = tuple(f"c{i}" for i in range(n_l))
    right = tuple(f"x{j}" for j in range(n_r))
    edges = []
    for _ in left:
        adj = tuple(right[j] for j in range(n_r) if rng.random() < p_edge)
        edges.append(adj)
    return Bipartite(left, right, tuple(edges))


def random_model(rng: np.random.Generator, max_constraints: int = 10,
                 max_unknowns: int = 8, max_faults: int = 4,
                 p_edge: float = 0.4) -> StructuralModel:
    """Random valid model: every fault touches at least one constraint and
    every constraint touches at least one variable."""
    n_c = int(rng.integers(1, max_constraints + 1))
    n_x = int(rng.integers(1, max_unknowns + 1))
    n_f = int(rng.integers(0, max_faults + 1))
    variables = [Variable(f"x{j}", UNKNOWN, "") for j in range(n_x)]
    variables += [Variable(f"f{j}", FAULT, "") for j in range(n_f)]
    constraints = []
    for i in range(n_c):
        touches = [f"x{j}" for j in range(n_x) if rng.random() < p_edge]
        if not touches:
            touches = [f"x{int(rng.integers(0, n_x))}"]
        faults = tuple(f"f{j}" for j in range(n_f) if rng.random() < 0.3)
        constraints.append(Constraint(f"c{i}", tuple(touches) + faults, faults))
    # orphaned faults violate the model invariants; pin each to a constraint
    touched = {f for c in constraints for f in c.faults}
    for j in range(n_f):
        fid = f"f{j}"
        if fid not in touched:
            k = int(rng.integers(0, n_c))
            c = constraints[k]
            constraints[k] = Constraint(c.id, c.touches + (fid,), c.faults + (fid,))
    return StructuralModel("random", tuple(variables), tuple(constraints))
