"""Negative sampling, the mini-batch training loop, ranking metrics and the
triadic-closure synthetic benchmark."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from .errors import InvalidInputError, NumericError, SaturationError
from .graph import Graph
from .model import SegConfig, build_model
from .nn import autodiff as ad
from .nn.layers import bce_loss
from .nn.optim import adam_step

log = logging.getLogger(__name__)

MAX_CONSECUTIVE_REJECTIONS = 1_000_000
REPORT_FORMAT_VERSION = 1


def _key(u, v):
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


def _pair_set(pairs) -> set:
    return {_key(u, v) for u, v in np.asarray(pairs).reshape(-1, 2).tolist()}


@dataclass
class SplitDataset:
    """Positive pairs per split plus optional fixed evaluation negatives.

    ``*_neg`` are shared negative pools (Hits@K / AUC). ``*_mrr_neg`` hold,
    for every positive ``(u, v)``, a row of candidate nodes ``w`` forming
    per-source negatives ``(u, w)``.
    """

    train_pos: np.ndarray
    valid_pos: np.ndarray
    test_pos: np.ndarray
    valid_neg: Optional[np.ndarray] = None
    test_neg: Optional[np.ndarray] = None
    valid_mrr_neg: Optional[np.ndarray] = None
    test_mrr_neg: Optional[np.ndarray] = None
    neg_ratio: int = 1
    seed: int = 0

    def heldout_positives(self) -> set:
        return _pair_set(self.valid_pos) | _pair_set(self.test_pos)

    def validate(self, g: Graph) -> None:
        tr, va, te = _pair_set(self.train_pos), _pair_set(self.valid_pos), _pair_set(self.test_pos)
        if tr & va or tr & te or va & te:
            raise InvalidInputError("train/valid/test positives overlap")
        missing = [e for e in tr if not g.has_edge(*e)]
        if missing:
            raise InvalidInputError(f"{len(missing)} train positives are not edges of the graph, "
                                    f"e.g. {missing[0]}")
        positives = tr | va | te
        for name in ("valid_neg", "test_neg"):
            neg = getattr(self, name)
            if neg is not None and _pair_set(neg) & positives:
                raise InvalidInputError(f"{name} contains a positive pair")
        for name, pos in (("valid_mrr_neg", self.valid_pos), ("test_mrr_neg", self.test_pos)):
            cand = getattr(self, name)
            if cand is None:
                continue
            if cand.shape[0] != len(pos):
                raise InvalidInputError(f"{name} needs one candidate row per positive")
            for (u, _), row in zip(pos.tolist(), cand.tolist()):
                if any(_key(u, w) in positives for w in row):
                    raise InvalidInputError(f"{name} contains a positive pair for source {u}")


# -- sampling -----------------------------------------------------------------

def sample_negatives(g: Graph, count: int, seed, forbidden=()) -> np.ndarray:
    """``count`` distinct uniformly drawn non-edges avoiding ``forbidden`` pairs.

    Rejection sampling; more than a million consecutive rejections (or too
    few candidates to begin with) raises :class:`SaturationError`.
    """
    forbidden = forbidden if isinstance(forbidden, set) else _pair_set(forbidden) if len(forbidden) else set()
    n = g.num_nodes
    blocked = len({e for e in forbidden if not g.has_edge(*e)})
    available = n * (n - 1) // 2 - g.num_edges - blocked
    if count > available:
        raise SaturationError(f"asked for {count} negatives but only {available} non-edges exist")
    rng = np.random.default_rng(seed)
    chosen, out = set(), []
    rejections = 0
    while len(out) < count:
        for u, v in rng.integers(0, n, size=(max(64, 2 * (count - len(out))), 2)).tolist():
            key = _key(u, v)
            if u == v or key in chosen or key in forbidden or g.has_edge(u, v):
                rejections += 1
                if rejections > MAX_CONSECUTIVE_REJECTIONS:
                    raise SaturationError("negative sampling saturated: graph too dense")
                continue
            rejections = 0
            chosen.add(key)
            out.append(key)
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# -- training -----------------------------------------------------------------

@dataclass
class TrainResult:
    model: object
    loss_curve: List[float]
    graph: Graph


class PairCache:
    """Memoizes parameter-independent pair preparation (subgraph + labels)."""

    def __init__(self, model, g: Graph, threads: Optional[int] = None):
        self.model = model
        self.g = g
        self.threads = threads or os.cpu_count() or 1
        self._store: dict = {}

    def get_many(self, pairs) -> list:
        pairs = [(int(u), int(v)) for u, v in pairs]
        todo = [p for p in dict.fromkeys(pairs) if p not in self._store]
        if todo:
            if self.threads > 1 and len(todo) > 1:
                with ThreadPoolExecutor(self.threads) as pool:
                    prepared = list(pool.map(lambda p: self.model.prepare(self.g, *p), todo))
            else:
                prepared = [self.model.prepare(self.g, *p) for p in todo]
            self._store.update(zip(todo, prepared))
        return [self._store[p] for p in pairs]


def training_graph(g: Graph, splits: SplitDataset, cfg: SegConfig) -> Graph:
    return g.with_edges(splits.valid_pos) if cfg.train_on_valid else g


def train(g: Graph, splits: SplitDataset, cfg: SegConfig, model=None, kind: str = "seg",
          threads: Optional[int] = None,
          on_epoch: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Train ``model`` (built from ``kind`` when omitted) with Adam on mean BCE.

    Each epoch subsamples ``pos_fraction`` of the positive training pairs,
    draws ``neg_ratio`` fresh uniform negatives per positive, shuffles, and
    takes one optimizer step per mini-batch. Returns the mean per-sample
    loss of every epoch.
    """
    g_train = training_graph(g, splits, cfg)
    if model is None:
        model = build_model(kind, cfg, g.feature_dim)
    pool = np.asarray(splits.train_pos, dtype=np.int64).reshape(-1, 2)
    if cfg.train_on_valid:
        pool = np.concatenate([pool, np.asarray(splits.valid_pos, dtype=np.int64).reshape(-1, 2)])
    forbidden = _pair_set(splits.test_pos) | (set() if cfg.train_on_valid else _pair_set(splits.valid_pos))
    cache = PairCache(model, g_train, threads)
    curve = []
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, epoch])
        n_pos = max(1, int(round(cfg.pos_fraction * len(pool))))
        pos = pool[np.sort(rng.choice(len(pool), n_pos, replace=False))]
        neg = sample_negatives(g_train, n_pos * cfg.neg_ratio, int(rng.integers(2**63)), forbidden)
        pairs = np.concatenate([pos, neg])
        labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        order = rng.permutation(len(pairs))
        pairs, labels = pairs[order], labels[order]
        total = 0.0
        for start in range(0, len(pairs), cfg.batch_size):
            batch = pairs[start:start + cfg.batch_size]
            y = labels[start:start + cfg.batch_size]
            preps = cache.get_many(batch)
            probs = ad.concat([ad.sigmoid(model.logit(p)) for p in preps], axis=0)
            loss = bce_loss(probs, y.reshape(-1, 1))
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch starting {start}")
            grads = ad.grad(loss, model.params)
            adam_step(model.params, grads, lr=cfg.lr)
            total += value * len(batch)
        curve.append(total / len(pairs))
        log.info("epoch %d loss %.6f", epoch + 1, curve[-1])
        if on_epoch is not None:
            on_epoch(epoch + 1, curve[-1])
    return TrainResult(model, curve, g_train)


def format_loss_curve(curve: Sequence[float], config: Optional[dict] = None) -> str:
    lines = []
    if config is not None:
        lines.append("# config " + json.dumps(config, sort_keys=True))
    lines.append("epoch,loss")
    lines.extend(f"{e},{v!r}" for e, v in enumerate(curve, start=1))
    return "\n".join(lines) + "\n"


# -- metrics ------------------------------------------------------------------

def _nonempty(x, name):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    return x


def evaluate_hits_at_k(pos_scores, neg_scores, k: int) -> float:
    """Fraction of positives scoring strictly above the k-th best negative.

    With fewer than ``k`` negatives every positive counts as a hit.
    """
    pos = _nonempty(pos_scores, "positive scores")
    neg = _nonempty(neg_scores, "negative scores")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if len(neg) < k:
        return 1.0
    threshold = np.partition(neg, len(neg) - k)[len(neg) - k]
    return float(np.mean(pos > threshold))


def evaluate_mrr(pos_scores, neg_scores) -> float:
    """Mean reciprocal rank; ``neg_scores[t]`` are the candidates of positive ``t``.

    Negatives tied with the positive rank above it.
    """
    pos = _nonempty(pos_scores, "positive scores")
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.ndim != 2 or neg.shape[0] != len(pos) or neg.shape[1] == 0:
        raise InvalidInputError(
            f"expected a ({len(pos)}, M>0) candidate matrix, got shape {neg.shape}")
    ranks = 1 + (neg >= pos[:, None]).sum(axis=1)
    # fsum is correctly rounded, so the result depends only on the ranks
    return math.fsum((1.0 / ranks).tolist()) / len(pos)


def evaluate_auc(pos_scores, neg_scores) -> float:
    """ROC AUC via the rank-sum statistic; ties count one half."""
    pos = _nonempty(pos_scores, "positive scores")
    neg = _nonempty(neg_scores, "negative scores")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


@dataclass
class EvalReport:
    hits_at_k: Dict[int, float]
    mrr: Optional[float]
    auc: float
    pos_scores: np.ndarray
    neg_scores: np.ndarray
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "seglink-eval", "format_version": REPORT_FORMAT_VERSION,
            "config": self.config,
            "hits_at_k": {str(k): v for k, v in sorted(self.hits_at_k.items())},
            "mrr": self.mrr, "auc": self.auc,
            "pos_scores": self.pos_scores.tolist(), "neg_scores": self.neg_scores.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def table(self) -> str:
        rows = [("AUC", self.auc)] + [(f"Hits@{k}", v) for k, v in sorted(self.hits_at_k.items())]
        if self.mrr is not None:
            rows.append(("MRR", self.mrr))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value:.4f}" for name, value in rows)


def score_pairs(model, g: Graph, pairs, threads: Optional[int] = None,
                cache: Optional[PairCache] = None) -> np.ndarray:
    """Model logits for each pair (ranking on logits avoids sigmoid saturation ties)."""
    cache = cache or PairCache(model, g, threads)
    return np.array([model.logit(p).item() for p in cache.get_many(pairs)])


def score_heuristic(g: Graph, pairs, kind: str = "cn") -> np.ndarray:
    from .structure import heuristic_score
    return np.array([heuristic_score(g, int(u), int(v), kind) for u, v in pairs])


def evaluate_scores(pos, neg, ks=(10, 50, 100), mrr_neg=None, config=None) -> EvalReport:
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    hits = {int(k): evaluate_hits_at_k(pos, neg, k) for k in ks}
    mrr = None if mrr_neg is None else evaluate_mrr(pos, mrr_neg)
    return EvalReport(hits, mrr, evaluate_auc(pos, neg), pos, neg, dict(config or {}))


def evaluate_model(model, g: Graph, splits: SplitDataset, split: str = "test", ks=(10, 50, 100),
                   threads: Optional[int] = None, scorer: Optional[Callable] = None) -> EvalReport:
    """Score a split's positives, shared negatives and (if present) MRR candidates.

    ``scorer(g, pairs) -> scores`` replaces the model, e.g. for heuristics.
    """
    pos_pairs = getattr(splits, f"{split}_pos")
    neg_pairs = getattr(splits, f"{split}_neg")
    cand = getattr(splits, f"{split}_mrr_neg")
    if neg_pairs is None:
        raise InvalidInputError(f"split {split!r} has no fixed negatives to rank against")
    if scorer is None:
        cache = PairCache(model, g, threads)
        scorer = lambda graph, pairs: score_pairs(model, graph, pairs, cache=cache)  # noqa: E731
    pos = scorer(g, pos_pairs)
    neg = scorer(g, neg_pairs)
    mrr_neg = None
    if cand is not None:
        src = np.repeat(pos_pairs[:, 0], cand.shape[1])
        flat = np.stack([src, cand.reshape(-1)], axis=1)
        mrr_neg = scorer(g, flat).reshape(cand.shape)
    config = model.config_dict() if model is not None else {}
    return evaluate_scores(pos, neg, ks, mrr_neg, config)


# -- synthetic benchmark ------------------------------------------------------

def generate_synthetic_benchmark(n: int = 1000, seed: int = 0, m: int = 3, triangle_prob: float = 0.6,
                                 n_valid: int = 100, n_test: int = 100, n_neg: int = 300,
                                 mrr_candidates: int = 20, feature_dim: int = 8):
    """Power-law graph with triadic closure and held-out closing pairs.

    The observed graph is a Holme-Kim power-law cluster graph. Held-out
    positives are non-adjacent pairs with at least two common neighbors
    (open triangles that would close). Evaluation negatives have no common
    neighbor. Node features are pure Gaussian noise. Returns
    ``(graph, SplitDataset)``; raises :class:`SaturationError` when some
    source has fewer than ``mrr_candidates`` eligible negatives.
    """
    if n < 100:
        raise ValueError("the synthetic benchmark needs n >= 100")
    rng = np.random.default_rng(seed)
    base = nx.powerlaw_cluster_graph(n, m, triangle_prob, seed=int(rng.integers(2**31)))
    edges = np.array(sorted(_key(u, v) for u, v in base.edges()), dtype=np.int64)
    features = rng.normal(size=(n, feature_dim))
    g = Graph.from_edges(n, edges, features)

    adj = sp.csr_matrix((np.ones(len(g.targets)), g.targets, g.offsets), shape=(n, n))
    common = sp.triu(adj @ adj, k=1).tocoo()
    open_pairs = [(u, v) for u, v, c in zip(common.row.tolist(), common.col.tolist(), common.data.tolist())
                  if c >= 2 and not g.has_edge(u, v)]
    if len(open_pairs) < n_valid + n_test:
        raise ValueError("not enough open triangles; raise n or triangle_prob")
    pick = rng.choice(len(open_pairs), n_valid + n_test, replace=False)
    held = np.array([open_pairs[t] for t in pick], dtype=np.int64)
    valid_pos, test_pos = held[:n_valid], held[n_valid:]

    neighbor_sets = [set(g.neighbors(u).tolist()) for u in range(n)]
    positives = _pair_set(held)

    def is_negative(u, v):
        return (u != v and not g.has_edge(u, v) and _key(u, v) not in positives
                and not (neighbor_sets[u] & neighbor_sets[v]))

    def draw_pool(count):
        out, seen, misses = [], set(), 0
        while len(out) < count:
            u, v = rng.integers(0, n, size=2).tolist()
            if is_negative(u, v) and _key(u, v) not in seen:
                seen.add(_key(u, v))
                out.append(_key(u, v))
                misses = 0
            else:
                misses += 1
                if misses > MAX_CONSECUTIVE_REJECTIONS:
                    raise SaturationError("too few pairs without common neighbors for the negative pool")
        return np.array(out, dtype=np.int64)

    def draw_candidates(pos_pairs):
        rows = []
        for u, v in pos_pairs.tolist():
            eligible = [w for w in range(n) if w != v and is_negative(u, w)]
            if len(eligible) < mrr_candidates:
                raise SaturationError(f"node {u} has only {len(eligible)} candidate negatives, "
                                      f"{mrr_candidates} requested")
            rows.append(rng.choice(eligible, mrr_candidates, replace=False).tolist())
        return np.array(rows, dtype=np.int64).reshape(len(pos_pairs), mrr_candidates)

    valid_neg, test_neg = draw_pool(n_neg), draw_pool(n_neg)
    valid_mrr = draw_candidates(valid_pos) if mrr_candidates else None
    test_mrr = draw_candidates(test_pos) if mrr_candidates else None
    splits = SplitDataset(edges, valid_pos, test_pos, valid_neg, test_neg, valid_mrr, test_mrr,
                          neg_ratio=1, seed=seed)
    return g, splits
