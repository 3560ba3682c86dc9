"""Immutable undirected graphs in CSR form and k-hop enclosing subgraphs."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Union

import numpy as np

from .errors import BoundsError, FormatError, InvalidPairError, ParseError

ByteSource = Union[bytes, bytearray, str, BinaryIO, io.TextIOBase]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with optional dense node features.

    Neighbors of node ``u`` are ``targets[offsets[u]:offsets[u + 1]]``,
    sorted ascending, without duplicates or self-loops. Use
    :meth:`from_edges` rather than the raw constructor.
    """

    num_nodes: int
    offsets: np.ndarray
    targets: np.ndarray
    features: Optional[np.ndarray] = None
    _edge_set: frozenset = field(default=frozenset(), repr=False)

    @classmethod
    def from_edges(cls, num_nodes: int, edges, features=None) -> "Graph":
        """Build a graph from an ``(m, 2)`` edge array.

        Edges are symmetrized and deduplicated; self-loops are dropped.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise BoundsError(f"edge endpoint outside [0, {num_nodes})")
        edges = edges[edges[:, 0] != edges[:, 1]]
        both = np.concatenate([edges, edges[:, ::-1]])
        keys = np.unique(both[:, 0] * num_nodes + both[:, 1]) if len(both) else np.zeros(0, np.int64)
        src = keys // max(num_nodes, 1)
        dst = keys % max(num_nodes, 1)
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(offsets, src + 1, 1)
        offsets = np.cumsum(offsets)
        if features is not None:
            features = np.array(features, dtype=np.float64)
            if features.ndim != 2 or features.shape[0] != num_nodes:
                raise FormatError(
                    f"feature matrix must have {num_nodes} rows, got shape {features.shape}")
            features.setflags(write=False)
        offsets.setflags(write=False)
        dst.setflags(write=False)
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        edge_set = frozenset(zip(lo[src < dst].tolist(), hi[src < dst].tolist()))
        return cls(num_nodes, offsets, dst, features, edge_set)

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.targets) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.targets[self.offsets[u]:self.offsets[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    def edges(self) -> np.ndarray:
        """Each undirected edge once, as ``(u, v)`` with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        mask = src < self.targets
        return np.stack([src[mask], self.targets[mask]], axis=1)

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        a[src, self.targets] = 1.0
        return a

    def with_edges(self, extra_edges) -> "Graph":
        """Return a new graph with ``extra_edges`` added."""
        edges = np.concatenate([self.edges(), np.asarray(extra_edges, dtype=np.int64).reshape(-1, 2)])
        return Graph.from_edges(self.num_nodes, edges, self.features)

    def without_edges(self, removed) -> "Graph":
        drop = {(min(u, v), max(u, v)) for u, v in np.asarray(removed).reshape(-1, 2).tolist()}
        kept = [e for e in self.edges().tolist() if tuple(e) not in drop]
        return Graph.from_edges(self.num_nodes, np.array(kept, dtype=np.int64).reshape(-1, 2),
                                self.features)


def adjacency_query(g: Graph, u: int):
    """Return ``(sorted neighbor array, degree)`` of node ``u``."""
    if not 0 <= u < g.num_nodes:
        raise BoundsError(f"node {u} out of range [0, {g.num_nodes})")
    nbrs = g.neighbors(u)
    return nbrs, len(nbrs)


# -- text formats -----------------------------------------------------------

def _text_lines(source: ByteSource):
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    return text.splitlines()


def read_pairs(source: ByteSource) -> np.ndarray:
    """Parse ``u v`` lines into an ``(m, 2)`` int array, preserving order.

    Unlike :func:`load_edge_list` nothing is symmetrized or deduplicated,
    so this is the reader for split and candidate files.
    """
    rows = []
    for lineno, line in enumerate(_text_lines(source), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {s!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {s!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError(f"negative node id in {s!r}", lineno)
        rows.append((u, v))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def read_features(source: ByteSource):
    """Parse ``u f_1 ... f_D`` lines; returns ``(ids, matrix)``."""
    ids, rows = [], []
    dim = None
    for lineno, line in enumerate(_text_lines(source), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        try:
            u = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(f"malformed feature line {s!r}", lineno) from None
        if u < 0:
            raise ParseError(f"negative node id in {s!r}", lineno)
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise FormatError(f"line {lineno}: feature dimension {len(vals)} != {dim}")
        ids.append(u)
        rows.append(vals)
    return np.array(ids, dtype=np.int64), np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)


def load_edge_list(source: ByteSource, feature_source: Optional[ByteSource] = None) -> Graph:
    """Load an undirected graph from edge-list text (and optional features).

    ``num_nodes`` is one more than the largest id seen in either file, or the
    feature-row count if that is larger. A ``# num_nodes N`` comment (as
    written by :func:`dump_graph`) raises the count to ``N``. Nodes without a
    feature line get a zero row.
    """
    lines = _text_lines(source)
    edges = read_pairs("\n".join(lines))
    n = int(edges.max()) + 1 if edges.size else 0
    for line in lines:
        parts = line.lstrip("# \t").split()
        if line.startswith("#") and len(parts) == 2 and parts[0] == "num_nodes":
            n = max(n, int(parts[1]))
    features = None
    if feature_source is not None:
        ids, rows = read_features(feature_source)
        if len(ids):
            n = max(n, int(ids.max()) + 1, len(ids))
        features = np.zeros((n, rows.shape[1]))
        features[ids] = rows
    return Graph.from_edges(n, edges, features)


def load_edge_list_relabeled(source: ByteSource):
    """Load an edge list with arbitrary integer ids, compacting them.

    Returns ``(graph, external_ids)`` where ``external_ids[local]`` is the
    original id of dense node ``local``.
    """
    pairs = read_pairs(source)
    external, inverse = np.unique(pairs.ravel(), return_inverse=True)
    return Graph.from_edges(len(external), inverse.reshape(-1, 2)), external


def format_pairs(pairs: Iterable, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.extend(f"{int(u)} {int(v)}" for u, v in pairs)
    return "\n".join(lines) + "\n"


def format_features(features: np.ndarray, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.extend(f"{u} " + " ".join(repr(float(x)) for x in row) for u, row in enumerate(features))
    return "\n".join(lines) + "\n"


def dump_graph(g: Graph, header: Iterable[str] = ()):
    """Serialize to ``(edge text, feature text or None)``; inverse of :func:`load_edge_list`.

    The node count is recorded as a ``# num_nodes`` comment so trailing
    isolated nodes survive the round trip.
    """
    header = list(header) + [f"num_nodes {g.num_nodes}"]
    edge_text = format_pairs(g.edges(), header)
    feat_text = None if g.features is None else format_features(g.features)
    return edge_text, feat_text


# -- enclosing subgraphs ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnclosingSubgraph:
    """k-hop neighborhood of a target pair, re-indexed locally.

    Local node 0 is the first target and local node 1 the second; the rest
    follow in ascending global id.
    """

    local_graph: Graph
    local_to_global: np.ndarray
    target_a: int
    target_b: int
    hops: int
    target_edge_removed: bool = False

    @property
    def num_nodes(self) -> int:
        return self.local_graph.num_nodes


def _khop_ball(g: Graph, source: int, k: int) -> set:
    seen = {source}
    frontier = [source]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for v in g.neighbors(u).tolist():
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return seen


def extract_enclosing_subgraph(g: Graph, i: int, j: int, k: int = 1,
                               exclude_target_edge: bool = True) -> EnclosingSubgraph:
    """Induced subgraph on every node within ``k`` hops of ``i`` or ``j``.

    With ``exclude_target_edge`` the edge ``{i, j}`` (if present) is left out
    of the local graph so a positive training pair cannot see its own label.
    """
    if i == j:
        raise InvalidPairError(f"target pair must be two distinct nodes, got ({i}, {j})")
    for u in (i, j):
        if not 0 <= u < g.num_nodes:
            raise BoundsError(f"node {u} out of range [0, {g.num_nodes})")
    if k < 1:
        raise ValueError("hops must be >= 1")
    nodes = _khop_ball(g, i, k) | _khop_ball(g, j, k)
    nodes.discard(i)
    nodes.discard(j)
    order = np.array([i, j] + sorted(nodes), dtype=np.int64)
    local = {int(u): idx for idx, u in enumerate(order)}

    src, dst = [], []
    for lu, gu in enumerate(order.tolist()):
        for gv in g.neighbors(gu).tolist():
            lv = local.get(gv)
            if lv is not None and lu < lv:
                src.append(lu)
                dst.append(lv)
    removed = False
    if exclude_target_edge and g.has_edge(i, j):
        keep = [not (a == 0 and b == 1) for a, b in zip(src, dst)]
        src = [a for a, kp in zip(src, keep) if kp]
        dst = [b for b, kp in zip(dst, keep) if kp]
        removed = True
    feats = None if g.features is None else g.features[order]
    local_graph = Graph.from_edges(len(order), np.array([src, dst], dtype=np.int64).T, feats)
    order.setflags(write=False)
    return EnclosingSubgraph(local_graph, order, 0, 1, k, removed)
