"""Target-to-target simple paths, node labeling schemes and classical heuristics."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.sparse as sp

from .errors import InvalidPairError, PathLimitError
from .graph import EnclosingSubgraph, Graph

DEFAULT_MAX_PATHS = 10_000
DEFAULT_DRNL_MAX_LABEL = 16


@dataclass(frozen=True)
class PathSet:
    """Simple paths from ``target_a`` to ``target_b`` as local node sequences."""

    paths: List[tuple]
    max_len: int

    def __len__(self):
        return len(self.paths)

    def counts_by_length(self) -> dict:
        out = {}
        for p in self.paths:
            out[len(p) - 1] = out.get(len(p) - 1, 0) + 1
        return out


@dataclass(frozen=True)
class LabelAssignment:
    labels: np.ndarray
    scheme: str
    lam: int

    @property
    def max_label(self) -> int:
        return int(self.labels.max()) if len(self.labels) else 0


def _bfs_distances(g: Graph, source: int, blocked: int = -1) -> np.ndarray:
    """Hop distances from ``source``; ``-1`` for unreachable. ``blocked`` is never entered."""
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in g.neighbors(u).tolist():
            if dist[v] < 0 and v != blocked:
                dist[v] = du
                queue.append(v)
    return dist


def enumerate_simple_paths(sub: EnclosingSubgraph, max_len: int,
                           max_paths: int = DEFAULT_MAX_PATHS) -> PathSet:
    """All simple ``target_a -> target_b`` paths with at most ``max_len`` edges.

    Depth-first search with backtracking. Branches are pruned when the
    remaining hop distance to ``target_b`` cannot fit in the edge budget.
    Raises :class:`PathLimitError` once more than ``max_paths`` paths exist.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    g = sub.local_graph
    a, b = sub.target_a, sub.target_b
    to_b = _bfs_distances(g, b)
    if to_b[a] < 0 or to_b[a] > max_len:
        return PathSet([], max_len)

    adj = [g.neighbors(u).tolist() for u in range(g.num_nodes)]
    paths = []
    stack = [a]
    on_path = {a}

    def dfs(u):
        budget = max_len - (len(stack) - 1)
        for v in adj[u]:
            if v == b:
                paths.append(tuple(stack) + (b,))
                if len(paths) > max_paths:
                    raise PathLimitError(
                        f"more than {max_paths} simple paths of length <= {max_len} between "
                        f"the targets of a {g.num_nodes}-node subgraph; graph too dense")
                continue
            if v in on_path or to_b[v] < 0 or to_b[v] > budget - 1:
                continue
            stack.append(v)
            on_path.add(v)
            dfs(v)
            on_path.discard(v)
            stack.pop()

    dfs(a)
    return PathSet(paths, max_len)


def path_label(sub: EnclosingSubgraph, ps: PathSet, lam: int) -> LabelAssignment:
    """Path labels: targets 0, path nodes (shortest containing path length - 1), fringe ``lam``."""
    labels = np.full(sub.num_nodes, lam, dtype=np.int64)
    for p in ps.paths:
        c = min(len(p) - 2, lam)
        for u in p[1:-1]:
            if c < labels[u]:
                labels[u] = c
    labels[sub.target_a] = 0
    labels[sub.target_b] = 0
    return LabelAssignment(labels, "pl", lam)


def drnl_label(sub: EnclosingSubgraph, max_label: int = DEFAULT_DRNL_MAX_LABEL) -> LabelAssignment:
    """Double-radius node labels.

    Distances to each target are measured with the other target removed.
    With ``d = d_a + d_b`` the label is
    ``1 + min(d_a, d_b) + (d//2) * (d//2 + d%2 - 1)``; targets get 1 and
    nodes unreachable from either target get 0. Labels above ``max_label``
    are clipped so the one-hot width stays fixed.
    """
    g = sub.local_graph
    a, b = sub.target_a, sub.target_b
    da = _bfs_distances(g, a, blocked=b)
    db = _bfs_distances(g, b, blocked=a)
    labels = np.zeros(g.num_nodes, dtype=np.int64)
    ok = (da >= 0) & (db >= 0)
    d = da + db
    half, odd = d // 2, d % 2
    labels[ok] = 1 + np.minimum(da, db)[ok] + half[ok] * (half[ok] + odd[ok] - 1)
    labels[a] = 1
    labels[b] = 1
    return LabelAssignment(np.minimum(labels, max_label), "drnl", max_label)


def one_hot_encode(la: LabelAssignment, lam: int) -> np.ndarray:
    """``(num_nodes, lam + 1)`` matrix with a 1 at column ``min(c_u, lam)``."""
    out = np.zeros((len(la.labels), lam + 1))
    out[np.arange(len(la.labels)), np.minimum(la.labels, lam)] = 1.0
    return out


def label_subgraph(sub: EnclosingSubgraph, scheme: str = "pl", lam: int = 4,
                   max_paths: int = DEFAULT_MAX_PATHS) -> LabelAssignment:
    if scheme == "pl":
        return path_label(sub, enumerate_simple_paths(sub, lam, max_paths), lam)
    if scheme == "drnl":
        return drnl_label(sub, lam)
    raise ValueError(f"unknown labeling scheme {scheme!r}")


# -- heuristics -------------------------------------------------------------

HEURISTICS = ("cn", "jaccard", "aa", "katz")


def _katz(g: Graph, i: int, j: int, alpha: float, max_len: int) -> float:
    adj = sp.csr_matrix((np.ones(len(g.targets)), g.targets, g.offsets),
                        shape=(g.num_nodes, g.num_nodes))
    walks = np.zeros(g.num_nodes)
    walks[i] = 1.0
    score = 0.0
    for length in range(1, max_len + 1):
        walks = adj @ walks
        score += alpha ** length * walks[j]
    return float(score)


def heuristic_score(g: Graph, i: int, j: int, kind: str = "cn",
                    katz_alpha: float = 0.05, katz_max_len: int = 4) -> float:
    """Topology-only similarity of ``(i, j)``: cn, jaccard, aa (Adamic-Adar) or katz.

    Katz counts walks (not simple paths) up to ``katz_max_len`` edges.
    """
    if i == j:
        raise InvalidPairError(f"target pair must be two distinct nodes, got ({i}, {j})")
    kind = kind.lower()
    if kind == "katz":
        if not 0 < katz_alpha < 1 or katz_max_len < 1:
            raise ValueError("katz requires 0 < alpha < 1 and max_len >= 1")
        return _katz(g, i, j, katz_alpha, katz_max_len)
    ni = set(g.neighbors(i).tolist())
    nj = set(g.neighbors(j).tolist())
    common = ni & nj
    if kind == "cn":
        return float(len(common))
    if kind == "jaccard":
        union = ni | nj
        return len(common) / len(union) if union else 0.0
    if kind == "aa":
        return float(sum(1.0 / math.log(g.degree(w)) for w in sorted(common) if g.degree(w) > 1))
    raise ValueError(f"unknown heuristic {kind!r}; expected one of {HEURISTICS}")
