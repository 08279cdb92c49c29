"""Independent reference implementations used by the tests.

These are deliberately naive: plain sets, explicit loops and full
enumeration, sharing no code with the package under test.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np


def random_dag(rng: np.random.Generator, max_classes: int = 40, max_edges: int = 80):
    """Random subclass DAG as ``(child, parent)`` name pairs.

    Edges always point from a higher to a lower index, so the graph is
    acyclic.  Every class has an edge; about a third of the graphs get a
    second root with its own disconnected component.
    """
    n = int(rng.integers(2, max_classes + 1))
    cut = int(rng.integers(2, n - 1)) if n > 3 and rng.random() < 0.3 else n
    lo = lambda i: 0 if i < cut else cut
    edges = set()
    for i in range(1, n):
        if i != cut:
            edges.add((i, int(rng.integers(lo(i), i))))
    budget = int(rng.integers(0, max(1, max_edges - len(edges)) + 1))
    for _ in range(budget):
        if len(edges) >= max_edges:
            break
        i = int(rng.integers(1, n))
        if i == lo(i):
            continue
        edges.add((i, int(rng.integers(lo(i), i))))
    return [(f"c{c}", f"c{p}") for c, p in sorted(edges)]


def bfs_ancestors(edges, cls):
    """Reflexive-transitive ancestors by breadth-first search over parents."""
    parents = {}
    for c, p in edges:
        parents.setdefault(c, set()).add(p)
    seen = {cls}
    queue = deque([cls])
    while queue:
        for p in parents.get(queue.popleft(), ()):
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def brute_common(edges, c1, c2):
    up1 = set().union(*(bfs_ancestors(edges, c) for c in c1))
    up2 = set().union(*(bfs_ancestors(edges, c) for c in c2))
    return up1 & up2


def brute_dca(edges, c1, c2):
    """Common ancestors with every strict super-class of another one removed."""
    common = brute_common(edges, c1, c2)
    out = set()
    for a in common:
        if not any(b != a and a in bfs_ancestors(edges, b) for b in common):
            out.add(a)
    return out


def confusion_metrics(pred, true):
    """Positive-class precision and recall plus support-weighted F1."""
    tp = sum(1 for p, t in zip(pred, true) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(pred, true) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(pred, true) if p == 0 and t == 1)
    tn = sum(1 for p, t in zip(pred, true) if p == 0 and t == 0)

    def f1(p, r):
        return 2 * p * r / (p + r) if p + r else 0.0

    p1 = tp / (tp + fp) if tp + fp else 0.0
    r1 = tp / (tp + fn) if tp + fn else 0.0
    p0 = tn / (tn + fn) if tn + fn else 0.0
    r0 = tn / (tn + fp) if tn + fp else 0.0
    n1, n0 = tp + fn, tn + fp
    weighted = (n1 * f1(p1, r1) + n0 * f1(p0, r0)) / (n1 + n0)
    return p1, r1, weighted


def wilcoxon_enumerate(d):
    """Two-sided exact signed-rank p-value by listing every sign assignment."""
    d = [x for x in d if x != 0]
    n = len(d)
    if n == 0:
        return 1.0
    mags = sorted(abs(x) for x in d)
    rank = {}
    for v in set(mags):
        pos = [i + 1 for i, m in enumerate(mags) if m == v]
        rank[v] = sum(pos) / len(pos)
    ranks = [rank[abs(x)] for x in d]
    observed = sum(r for r, x in zip(ranks, d) if x > 0)
    le = ge = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        le += w <= observed + 1e-9
        ge += w >= observed - 1e-9
    return min(1.0, 2 * min(le, ge) / 2 ** n)


def numeric_grad(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f(x)
        x[i] = old - eps
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / denom)
