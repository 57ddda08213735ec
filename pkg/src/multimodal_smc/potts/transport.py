"""
Exact optimal transport between two small discrete distributions.

Transportation simplex: north-west corner start, duals from the basis tree,
entering cell chosen by Bland's rule (first cell with negative reduced cost),
ratio test along the unique basis cycle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TransportInstance:
    """Supplies a, demands b with equal totals, and a ground cost matrix."""
    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        c = np.asarray(self.cost, float)
        if c.shape != (a.size, b.size):
            raise ValueError("cost shape does not match supplies and demands")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("masses must be nonnegative")
        if abs(a.sum() - b.sum()) > 1e-12 * max(1.0, a.sum()):
            raise ValueError("supplies and demands must have equal totals")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cost", c)


def _northwest(a, b):
    m, n = a.size, b.size
    a, b = a.copy(), b.copy()
    flow = np.zeros((m, n))
    basis = []
    i = j = 0
    while i < m and j < n:
        q = min(a[i], b[j])
        flow[i, j] = q
        basis.append((i, j))
        a[i] -= q
        b[j] -= q
        if i == m - 1 and j == n - 1:
            break
        # advance exactly one index so the basis keeps m + n - 1 cells
        if (a[i] <= b[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return flow, basis


def _duals(cost, basis, m, n):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    rows = {}
    cols = {}
    for i, j in basis:
        rows.setdefault(i, []).append(j)
        cols.setdefault(j, []).append(i)
    stack = [("r", 0)]
    while stack:
        kind, x = stack.pop()
        if kind == "r":
            for j in rows.get(x, []):
                if np.isnan(v[j]):
                    v[j] = cost[x, j] - u[x]
                    stack.append(("c", j))
        else:
            for i in cols.get(x, []):
                if np.isnan(u[i]):
                    u[i] = cost[i, x] - v[x]
                    stack.append(("r", i))
    return u, v


def _cycle(basis, m, n, enter):
    """Cells of the basis path from row enter[0] to column enter[1]."""
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    start, goal = ("r", enter[0]), ("c", enter[1])
    prev = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nb in adj.get(node, []):
            if nb not in prev:
                prev[nb] = node
                stack.append(nb)
    path = []
    node = goal
    while prev[node] is not None:
        p = prev[node]
        cell = (p[1], node[1]) if p[0] == "r" else (node[1], p[1])
        path.append(cell)
        node = p
    return path[::-1]


def transport_simplex(a, b, cost, tol=1e-12, max_iter=10_000):
    """Minimal transport cost and an optimal plan.

    Parameters
    ----------
    a, b : array_like
        Supplies and demands with equal totals.
    cost : array_like (len(a), len(b))
    tol : float
        Reduced costs below ``-tol`` are improving.

    Returns
    -------
    (float, ndarray)
    """
    inst = TransportInstance(a, b, cost)
    a, b, c = inst.a, inst.b, inst.cost
    b = b * (a.sum() / b.sum()) if b.sum() > 0 else b
    m, n = a.size, b.size
    flow, basis = _northwest(a, b)
    for _ in range(max_iter):
        u, v = _duals(c, basis, m, n)
        red = c - u[:, None] - v[None, :]
        inb = set(basis)
        enter = None
        for i in range(m):
            for j in range(n):
                if (i, j) not in inb and red[i, j] < -tol:
                    enter = (i, j)
                    break
            if enter is not None:
                break
        if enter is None:
            break
        path = _cycle(basis, m, n, enter)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[cell] for cell in minus)
        # Bland: among tied leaving cells, take the lowest index
        leave = min(cell for cell in minus if flow[cell] <= theta)
        for cell in minus:
            flow[cell] -= theta
        for cell in plus:
            flow[cell] += theta
        flow[enter] += theta
        flow[leave] = 0.0
        basis.remove(leave)
        basis.append(enter)
    else:
        raise RuntimeError("transportation simplex did not converge")
    flow = np.maximum(flow, 0.0)
    return float(np.sum(flow * c)), flow


def wasserstein1(support_x, px, support_y, py, metric):
    """W_1 between two discrete laws given a metric on support points."""
    cost = np.array([[metric(x, y) for y in support_y] for x in support_x], dtype=float)
    return transport_simplex(px, py, cost)[0]
