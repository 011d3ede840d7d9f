"""Frame-to-frame bipartite assignment and 3-frame triplet selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import TrackerConfig


@dataclass
class CostMatrix:
    """Pairing costs between rows (tracks) and columns (detections).

    ``np.inf`` marks gated-out pairs. Leaving row ``i`` unassigned costs
    ``row_null[i]`` and leaving column ``j`` unassigned costs ``col_null[j]``;
    both default to the scalar ``null_cost``.
    """

    costs: np.ndarray
    null_cost: float = np.inf
    row_null: np.ndarray | None = None
    col_null: np.ndarray | None = None

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float).reshape(
            np.shape(self.costs) if np.ndim(self.costs) == 2 else (0, 0))
        n, m = self.costs.shape
        self.row_null = np.full(n, float(self.null_cost)) if self.row_null is None \
            else np.asarray(self.row_null, dtype=float)
        self.col_null = np.full(m, float(self.null_cost)) if self.col_null is None \
            else np.asarray(self.col_null, dtype=float)
        if np.any(self.costs <= 0):
            raise ValueError("pairing costs must be positive")

    def total(self, pairs) -> float:
        """Objective value of an assignment: chosen costs plus null costs."""
        rows = {r for r, _ in pairs}
        cols = {c for _, c in pairs}
        tot = sum(self.costs[r, c] for r, c in pairs)
        tot += sum(self.row_null[i] for i in range(len(self.row_null)) if i not in rows)
        tot += sum(self.col_null[j] for j in range(len(self.col_null)) if j not in cols)
        return float(tot)


def solve_bipartite(m: CostMatrix) -> list[tuple[int, int]]:
    """Globally optimal partial assignment, returned sorted by row.

    The problem is embedded in a square ``(n+m)`` assignment with one dummy
    column per row and one dummy row per column. Pairs costing more than
    leaving both ends unassigned are dominated and removed first, which also
    keeps the cost scale bounded for the shortest-augmenting-path solver.
    """
    n, k = m.costs.shape
    if n == 0 or k == 0:
        return []
    c = m.costs.copy()
    c[c > m.row_null[:, None] + m.col_null[None, :]] = np.inf
    feasible = np.isfinite(c)
    if not feasible.any():
        return []
    # only rows/cols with a feasible pair can change the outcome
    rows = np.flatnonzero(feasible.any(axis=1))
    cols = np.flatnonzero(feasible.any(axis=0))
    c = c[np.ix_(rows, cols)]
    n, k = c.shape
    # an infinite null cost (no non-assignment option) needs a finite stand-in
    # larger than any complete pairing so the embedding stays solvable
    stand_in = 4.0 * (c[np.isfinite(c)].sum() + 1.0)
    rnull = np.where(np.isfinite(m.row_null[rows]), m.row_null[rows], stand_in)
    cnull = np.where(np.isfinite(m.col_null[cols]), m.col_null[cols], stand_in)
    big = np.full((n + k, n + k), np.inf)
    big[:n, :k] = c
    big[:n, k:][np.diag_indices(n)] = rnull
    big[n:, :k][np.diag_indices(k)] = cnull
    big[n:, k:] = 0.0
    r_idx, c_idx = linear_sum_assignment(big)
    out = [(int(rows[r]), int(cols[cc])) for r, cc in zip(r_idx, c_idx) if r < n and cc < k]
    return sorted(out)


@dataclass(frozen=True)
class Triplet:
    i: int
    j: int
    k: int
    cost: float


def triplet_cost(p1, p2, p3) -> float:
    """Normalised change of displacement across three frames, in [0, 2]."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    l12, l23 = p2 - p1, p3 - p2
    denom = np.hypot(*l12) + np.hypot(*l23)
    if denom == 0:
        raise ValueError("triplet cost undefined for three coincident points")
    return float(np.hypot(*(l23 - l12)) / denom)


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def triplet_candidates(f1, f2, f3, gate: float, cost_max: float) -> list[Triplet]:
    """All gated triplets with cost <= ``cost_max``, sorted by cost then indices."""
    f1, f2, f3 = (np.asarray(f, dtype=float).reshape(-1, 2) for f in (f1, f2, f3))
    if min(len(f1), len(f2), len(f3)) == 0:
        return []
    ii, jj = np.nonzero(_dist(f1, f2) <= gate)
    if len(ii) == 0:
        return []
    near23 = _dist(f2, f3) <= gate
    sel_i, sel_j, sel_k = [], [], []
    for i, j in zip(ii, jj):
        ks = np.flatnonzero(near23[j])
        sel_i.append(np.full(len(ks), i))
        sel_j.append(np.full(len(ks), j))
        sel_k.append(ks)
    I, J, K = (np.concatenate(s) for s in (sel_i, sel_j, sel_k))
    if len(I) == 0:
        return []
    l12 = f2[J] - f1[I]
    l23 = f3[K] - f2[J]
    denom = np.hypot(l12[:, 0], l12[:, 1]) + np.hypot(l23[:, 0], l23[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        cost = np.hypot(*(l23 - l12).T) / denom
    keep = (denom > 0) & (cost <= cost_max)
    I, J, K, cost = I[keep], J[keep], K[keep], cost[keep]
    order = np.lexsort((K, J, I, cost))
    return [Triplet(int(I[o]), int(J[o]), int(K[o]), float(cost[o])) for o in order]


def solve_triplets(f1, f2, f3, cfg: TrackerConfig, dt: float) -> list[Triplet]:
    """Greedy disjoint triplet selection in ascending cost.

    Exact 3-dimensional matching is NP-hard; accepting the cheapest triplet
    whose detections are all still free is the usual particle-tracking
    heuristic and stays close to optimal at small scale.
    """
    chosen = []
    used = (set(), set(), set())
    for t in triplet_candidates(f1, f2, f3, cfg.gate(dt), cfg.init_cost_max):
        if t.i in used[0] or t.j in used[1] or t.k in used[2]:
            continue
        chosen.append(t)
        used[0].add(t.i)
        used[1].add(t.j)
        used[2].add(t.k)
    return chosen
