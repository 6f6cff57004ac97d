"""Exact solver for small dense transportation linear programs.

Minimizes <cost, X> over nonnegative matrices with fixed row and column sums.
Classic transportation simplex: northwest-corner start, potential (u, v)
improvement steps, Bland's rule against cycling. Instances here are tiny
(tens of symbols per side), so no sparse machinery is needed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["transport_lp"]

_MAX_PIVOTS = 100_000


def transport_lp(cost: np.ndarray, row_sums: np.ndarray, col_sums: np.ndarray) -> np.ndarray:
    """Return a minimizing vertex of the transportation polytope.

    Row and column sums must be nonnegative and share the same total. Zero
    marginals are stripped before solving, so degenerate slices are fine.
    """
    cost = np.asarray(cost, dtype=float)
    r = np.asarray(row_sums, dtype=float)
    c = np.asarray(col_sums, dtype=float)
    m, n = cost.shape
    if r.shape != (m,) or c.shape != (n,):
        raise ValueError("marginal lengths do not match the cost matrix")
    if np.any(r < -1e-12) or np.any(c < -1e-12):
        raise ValueError("marginals must be nonnegative")
    r = np.maximum(r, 0.0)
    c = np.maximum(c, 0.0)
    if abs(r.sum() - c.sum()) > 1e-9 * max(1.0, r.sum()):
        raise ValueError(f"marginal totals differ: {r.sum()} vs {c.sum()}")

    x = np.zeros((m, n))
    rows = np.flatnonzero(r > 0)
    cols = np.flatnonzero(c > 0)
    if rows.size == 0 or cols.size == 0:
        return x
    if rows.size == 1:
        x[rows[0], cols] = c[cols]
        return x
    if cols.size == 1:
        x[rows, cols[0]] = r[rows]
        return x

    sub = _solve_positive(cost[np.ix_(rows, cols)], r[rows], c[cols])
    x[np.ix_(rows, cols)] = sub
    return x


def _northwest_corner(r: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    m, n = r.size, c.size
    x = np.zeros((m, n))
    basis: list[tuple[int, int]] = []
    a = r.copy()
    b = c.copy()
    i = j = 0
    while True:
        t = min(a[i], b[j])
        x[i, j] = t
        basis.append((i, j))
        a[i] -= t
        b[j] -= t
        if i == m - 1 and j == n - 1:
            break
        # advance exactly one index per step so the basis keeps m + n - 1
        # cells, recording zero allocations on ties (degenerate basis)
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(basis: list[tuple[int, int]], cost: np.ndarray, m: int, n: int):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    by_row: list[list[int]] = [[] for _ in range(m)]
    by_col: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        by_row[i].append(j)
        by_col[j].append(i)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in by_row[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in by_col[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis: list[tuple[int, int]], enter: tuple[int, int], m: int, n: int):
    """Path through the basis tree from the entering row node to its column node."""
    by_row: list[list[tuple[int, int]]] = [[] for _ in range(m)]
    by_col: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for cell in basis:
        by_row[cell[0]].append(cell)
        by_col[cell[1]].append(cell)
    start = ("r", enter[0])
    goal = ("c", enter[1])
    prev: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]]] = {}
    frontier = [start]
    seen = {start}
    while frontier:
        nxt = []
        for node in frontier:
            kind, idx = node
            edges = by_row[idx] if kind == "r" else by_col[idx]
            for cell in edges:
                other = ("c", cell[1]) if kind == "r" else ("r", cell[0])
                if other in seen:
                    continue
                seen.add(other)
                prev[other] = (node, cell)
                if other == goal:
                    path = []
                    cur = goal
                    while cur != start:
                        cur, edge = prev[cur]
                        path.append(edge)
                    path.reverse()
                    return path
                nxt.append(other)
        frontier = nxt
    raise RuntimeError("basis is not a spanning tree")  # pragma: no cover


def _solve_positive(cost: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    m, n = cost.shape
    x, basis = _northwest_corner(r, c)
    basis.sort()
    eps = 1e-11 * (1.0 + float(np.abs(cost).max()))
    in_basis = np.zeros((m, n), dtype=bool)
    for i, j in basis:
        in_basis[i, j] = True

    for _ in range(_MAX_PIVOTS):
        u, v = _potentials(basis, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        # Bland: first negative reduced cost in row-major order
        candidates = np.flatnonzero((reduced < -eps).ravel())
        if candidates.size == 0:
            return x
        enter = divmod(int(candidates[0]), n)

        path = _find_cycle(basis, enter, m, n)
        minus = path[0::2]
        theta_cells = [(x[i, j], (i, j)) for i, j in minus]
        theta = min(t for t, _ in theta_cells)
        leave = min(cell for t, cell in theta_cells if t <= theta)

        x[enter] += theta
        for k, (i, j) in enumerate(path):
            x[i, j] += theta if k % 2 else -theta
        x[leave] = 0.0
        in_basis[leave] = False
        in_basis[enter] = True
        basis.remove(leave)
        basis.append(enter)
        basis.sort()
    raise RuntimeError("transportation simplex failed to terminate")  # pragma: no cover
