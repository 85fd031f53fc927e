"""Max-weight bipartite matching: exact solver and greedy baseline.

The exact solver is an O(n^3) shortest-augmenting-path method with dual
potentials (Jonker-Volgenant style), run on nonnegative costs obtained by
negating the reward matrix and offsetting each row by its maximum.
Maximization problems with ties are resolved to the lexicographically
smallest optimal permutation, which the dual variables make cheap: every
optimal assignment lives inside the zero-reduced-cost subgraph, where a
greedy matching with augmenting-path feasibility checks finds the
lexicographic minimum.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from geomatch.models import Permutation


def _as_weights(w: np.ndarray) -> np.ndarray:
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weight matrix contains non-finite entries")
    return w


@njit(cache=True)
def _sap_min(cost):  # pragma: no cover - exercised via solve_lap_max
    """Shortest-augmenting-path assignment on a nonnegative cost matrix.

    Returns (row_to_col, u, v) with feasible duals: cost[i,j] - u[i] - v[j] >= 0
    and equality on assignment edges. Unsettled columns are kept in a
    compact list so each Dijkstra step scans only the shrinking frontier.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    col_row = np.zeros(n + 1, np.int64)  # col_row[j]: 1-based row matched to column j
    way = np.zeros(n + 1, np.int64)
    minv = np.empty(n + 1)
    free_cols = np.empty(n, np.int64)
    settled = np.empty(n + 1, np.int64)
    for i in range(1, n + 1):
        col_row[0] = i
        j0 = 0
        n_free = n
        for k in range(n):
            free_cols[k] = k + 1
            minv[k + 1] = np.inf
        n_settled = 0
        while True:
            settled[n_settled] = j0
            n_settled += 1
            i0 = col_row[j0]
            delta = np.inf
            k1 = -1
            for k in range(n_free):
                j = free_cols[k]
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    k1 = k
            j1 = free_cols[k1]
            for k in range(n_settled):
                j = settled[k]
                u[col_row[j]] += delta
                v[j] -= delta
            for k in range(n_free):
                minv[free_cols[k]] -= delta
            n_free -= 1
            free_cols[k1] = free_cols[n_free]
            j0 = j1
            if col_row[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            col_row[j0] = col_row[j1]
            j0 = j1
    row_to_col = np.empty(n, np.int64)
    for j in range(1, n + 1):
        row_to_col[col_row[j] - 1] = j - 1
    return row_to_col, u[1:].copy(), v[1:].copy()


def _lex_smallest_tight_matching(
    tight: np.ndarray, row_to_col: np.ndarray
) -> np.ndarray:
    """Lexicographically smallest perfect matching inside a tight subgraph.

    ``tight`` is a boolean adjacency matrix that is known to contain the
    perfect matching ``row_to_col``. Rows are fixed in index order to the
    smallest column that keeps a perfect matching available; feasibility
    is checked by rewiring the maintained matching with one augmenting
    path search per candidate.
    """
    n = tight.shape[0]
    match = row_to_col.copy()
    col_of = np.empty(n, dtype=np.int64)
    col_of[match] = np.arange(n)
    fixed_col = np.zeros(n, dtype=bool)

    def try_rewire(row: int, col: int) -> bool:
        # Move `col` from its current owner to `row`; the displaced rows must
        # re-match within the tight graph using only unfixed columns.
        owner = int(col_of[col])
        freed = int(match[row])
        match[row] = col
        col_of[col] = row
        # Alternating-path DFS from `owner` to the only free column `freed`.
        visited = np.zeros(n, dtype=bool)
        visited[col] = True
        stack = [owner]
        parent_row: dict[int, int] = {}
        found = False
        while stack and not found:
            r = stack.pop()
            for j in np.flatnonzero(tight[r]):
                j = int(j)
                if visited[j] or fixed_col[j]:
                    continue
                visited[j] = True
                parent_row[j] = r
                if j == freed:
                    cur = j
                    while True:
                        r2 = parent_row[cur]
                        nxt = int(match[r2])
                        match[r2] = cur
                        col_of[cur] = r2
                        if r2 == owner:
                            break
                        cur = nxt
                    found = True
                    break
                stack.append(int(col_of[j]))
        if not found:
            # Revert the tentative move.
            match[row] = freed
            col_of[freed] = row
            col_of[col] = owner
        return found

    for i in range(n):
        candidates = np.flatnonzero(tight[i] & ~fixed_col)
        for j in candidates:
            j = int(j)
            if match[i] == j:
                fixed_col[j] = True
                break
            if try_rewire(i, j):
                fixed_col[j] = True
                break
        else:  # pragma: no cover - tight graph always contains `match`
            fixed_col[int(match[i])] = True
    return match


def solve_lap_max(w: np.ndarray) -> tuple[Permutation, float]:
    """Exact max-weight assignment with deterministic tie-breaking.

    Returns the lexicographically smallest permutation among those
    attaining ``max_pi sum_i w[i, pi(i)]``, together with the optimum.
    """
    w = _as_weights(w)
    n = w.shape[0]
    if n == 0:
        return Permutation(np.empty(0, dtype=np.int64)), 0.0
    cost = w.max(axis=1, keepdims=True) - w
    row_to_col, u, v = _sap_min(cost)
    objective = float(w[np.arange(n), row_to_col].sum())

    # Tie detection targets exact ties only: the dual updates accumulate at
    # most O(n) rounding steps, so anything beyond a few hundred ulps of the
    # cost scale is a genuine gap, not a tie. (A looser tolerance would fire
    # the canonicalization on every rank-deficient weight matrix; a scale-free
    # floor would make every edge of a tiny-scale problem look tied.)
    scale = float(np.abs(cost).max())
    tol = 4.0 * n * np.finfo(np.float64).eps * scale
    reduced = cost - u[:, None] - v[None, :]
    tight = reduced <= tol
    if int(tight.sum()) > n:
        canonical = _lex_smallest_tight_matching(tight, row_to_col)
        canonical_obj = float(w[np.arange(n), canonical].sum())
        # Never trade optimality for tie-break cosmetics: accept the canonical
        # matching only when it is optimal up to summation roundoff.
        accept_tol = 8.0 * n * np.finfo(np.float64).eps * scale
        if canonical_obj >= objective - accept_tol:
            row_to_col = canonical
            objective = canonical_obj
    return Permutation(row_to_col), objective


def greedy_match(w: np.ndarray) -> tuple[Permutation, float]:
    """Greedy assignment: repeatedly take the globally largest free entry.

    Ties broken by smallest (row, col) lexicographically.
    """
    w = _as_weights(w)
    n = w.shape[0]
    rows, cols = np.unravel_index(np.arange(n * n), (n, n))
    order = np.lexsort((cols, rows, -w.ravel()))
    row_used = np.zeros(n, dtype=bool)
    col_used = np.zeros(n, dtype=bool)
    mapping = np.full(n, -1, dtype=np.int64)
    assigned = 0
    objective = 0.0
    for idx in order:
        i, j = int(rows[idx]), int(cols[idx])
        if row_used[i] or col_used[j]:
            continue
        mapping[i] = j
        row_used[i] = True
        col_used[j] = True
        objective += float(w[i, j])
        assigned += 1
        if assigned == n:
            break
    return Permutation(mapping), objective
