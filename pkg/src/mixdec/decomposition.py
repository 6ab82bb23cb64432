"""Recurrent classes and their cyclic mixing structure.

Nontrivial strongly connected components of the transition graph play
the role of the transitive pieces of the recurrent dynamics.  Each
class carries a period (the gcd of its cycle lengths, computed by BFS
leveling), a partition into cyclic classes permuted by the dynamics,
and per-class mixing certificates: the smallest power of the
period-step reachability relation that is all-pairs positive, searched
up to the Wielandt primitivity bound (m-1)^2 + 1.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ClassTooLargeError, TrivialClassError
from .transition import TransitionGraph

ORACLE_MAX_NODES = 12


@dataclass(frozen=True)
class RecurrentClass:
    nodes: tuple
    is_trivial: bool = False

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class MixingCertificate:
    """Wielandt-bounded mixing exponent for one cyclic class."""

    exponent: int | None
    bound: int
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.exponent is not None


@dataclass(frozen=True)
class CyclicDecomposition:
    cls: RecurrentClass
    period: int
    classes: tuple  # ordered partition; edges go classes[i] -> classes[i+1 mod period]
    certificates: tuple


def strongly_connected_components(graph: TransitionGraph):
    """All SCCs in topological order (iterative Tarjan)."""
    n = graph.n
    adj = graph.adj
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    sccs = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(adj[v])):
                w = adj[v][k]
                if index[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(tuple(sorted(comp)))
    sccs.reverse()  # Tarjan emits sinks first
    return sccs


def recurrent_classes(graph: TransitionGraph):
    """Nontrivial SCCs (multi-node, or single node with a self-loop)."""
    out = []
    for comp in strongly_connected_components(graph):
        if len(comp) > 1 or comp[0] in graph.adj[comp[0]]:
            out.append(RecurrentClass(nodes=comp))
    return out


def _class_edges(graph: TransitionGraph, nodes):
    keep = set(nodes)
    for u in nodes:
        for v in graph.adj[u]:
            if v in keep:
                yield u, v


def _bfs_levels(graph: TransitionGraph, nodes, root):
    keep = set(nodes)
    level = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in graph.adj[u]:
            if v in keep and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    return level


def class_period(graph: TransitionGraph, cls: RecurrentClass) -> int:
    """gcd of cycle lengths in the class, via BFS level defects."""
    if cls.is_trivial or not cls.nodes:
        raise TrivialClassError("trivial classes carry no period")
    root = cls.nodes[0]
    level = _bfs_levels(graph, cls.nodes, root)
    g = 0
    for u, v in _class_edges(graph, cls.nodes):
        g = math.gcd(g, level[u] + 1 - level[v])
    if g == 0:
        raise TrivialClassError("class contains no cycle")
    return g


def period_oracle(graph: TransitionGraph, cls: RecurrentClass) -> int:
    """Brute-force oracle: gcd of the lengths of all simple cycles,
    found by exhaustive DFS enumeration.  Desk scale only."""
    if cls.is_trivial or not cls.nodes:
        raise TrivialClassError("trivial classes carry no period")
    if len(cls.nodes) > ORACLE_MAX_NODES:
        raise ClassTooLargeError(
            f"period oracle limited to {ORACLE_MAX_NODES} nodes, "
            f"class has {len(cls.nodes)}"
        )
    sub = {u: tuple(v for v in graph.adj[u] if v in set(cls.nodes))
           for u in cls.nodes}
    g = 0
    for start in cls.nodes:
        # simple cycles whose minimal node is `start`
        stack = [(start, iter(sub[start]))]
        on_path = {start}
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if v < start:
                    continue
                if v == start:
                    g = math.gcd(g, len(stack))
                    if g == 1:
                        return 1
                    continue
                if v not in on_path:
                    on_path.add(v)
                    stack.append((v, iter(sub[v])))
                    advanced = True
                    break
            if not advanced:
                on_path.discard(u)
                stack.pop()
    if g == 0:
        raise TrivialClassError("class contains no cycle")
    return g


def _bool_power_block(P: np.ndarray, bound: int):
    """Smallest e <= bound with P^e all-true, else None."""
    if P.shape[0] == 0:
        return None
    Pi = P.astype(np.int64)
    Pe = Pi.copy()
    for e in range(1, bound + 1):
        if Pe.all():
            return e
        Pe = (Pe @ Pi > 0).astype(np.int64)
    return None


def cyclic_classes(
    graph: TransitionGraph, cls: RecurrentClass
) -> CyclicDecomposition:
    """Partition the class by BFS level mod period and certify mixing.

    Classes are ordered so that every induced edge goes from classes[i]
    to classes[i+1 mod period], with classes[0] holding the
    lowest-numbered node.
    """
    ell = class_period(graph, cls)
    root = cls.nodes[0]
    level = _bfs_levels(graph, cls.nodes, root)
    parts = [[] for _ in range(ell)]
    for u in sorted(cls.nodes):
        parts[level[u] % ell].append(u)
    classes = tuple(tuple(p) for p in parts)

    for u, v in _class_edges(graph, cls.nodes):
        if (level[u] + 1 - level[v]) % ell != 0:
            raise AssertionError("edge does not respect the cyclic partition")

    # period-step reachability restricted to each cyclic class
    pos = {u: i for i, u in enumerate(cls.nodes)}
    m_all = len(cls.nodes)
    A = np.zeros((m_all, m_all), dtype=np.int64)
    for u, v in _class_edges(graph, cls.nodes):
        A[pos[u], pos[v]] = 1
    P = A.copy()
    for _ in range(ell - 1):
        P = (P @ A > 0).astype(np.int64)

    certificates = []
    for part in classes:
        idx = [pos[u] for u in part]
        block = (P[np.ix_(idx, idx)] > 0).astype(np.int64)
        bound = (len(part) - 1) ** 2 + 1
        e = _bool_power_block(block, bound)
        certificates.append(
            MixingCertificate(
                exponent=e,
                bound=bound,
                failure=None
                if e is not None
                else f"no all-pairs power within Wielandt bound {bound}",
            )
        )
    return CyclicDecomposition(
        cls=cls, period=ell, classes=classes, certificates=tuple(certificates)
    )


def trapping_regions(graph: TransitionGraph):
    """Proper nonempty successor-closed node sets witnessing
    non-chain-transitivity: the forward closures of the strongly
    connected components, deduplicated.  Empty iff the graph is
    strongly connected."""
    sccs = strongly_connected_components(graph)
    if len(sccs) <= 1:
        return []
    comp_of = {}
    for ci, comp in enumerate(sccs):
        for u in comp:
            comp_of[u] = ci
    cadj = [set() for _ in sccs]
    for u, v in graph.edges():
        if comp_of[u] != comp_of[v]:
            cadj[comp_of[u]].add(comp_of[v])

    closures = {}

    def closure(ci):
        if ci in closures:
            return closures[ci]
        seen = {ci}
        queue = deque([ci])
        while queue:
            c = queue.popleft()
            for nxt in cadj[c]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        closures[ci] = seen
        return seen

    regions = set()
    for ci in range(len(sccs)):
        nodes = []
        for c in closure(ci):
            nodes.extend(sccs[c])
        if len(nodes) < graph.n:
            regions.add(tuple(sorted(nodes)))
    return sorted(regions, key=lambda r: (len(r), r))
