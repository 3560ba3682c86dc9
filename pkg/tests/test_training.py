import json
import math

import numpy as np
import pytest

from seglink.errors import InvalidInputError, SaturationError
from seglink.graph import Graph
from seglink.model import SegConfig, SegModel
from seglink.training import (SplitDataset, evaluate_auc, evaluate_hits_at_k, evaluate_model,
                              evaluate_mrr, evaluate_scores, format_loss_curve,
                              generate_synthetic_benchmark, sample_negatives, score_heuristic,
                              train)

from .oracles import auc_pairwise, hits_at_k_sorted, mrr_sorted, random_edges

SMALL = dict(struct_gcn_dim=8, embed_dim=8, gnn_dim=8, predictor_dim=16, sortpool_k=6)


@pytest.fixture(scope="module")
def bench():
    return generate_synthetic_benchmark(n=150, seed=2, n_valid=20, n_test=20, n_neg=60,
                                        mrr_candidates=5, feature_dim=3)


# -- negative sampling --------------------------------------------------------

def test_complete_graph_saturates():
    tri = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(SaturationError):
        sample_negatives(tri, 1, seed=0)


def test_path_has_exactly_one_negative():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert sample_negatives(g, 1, seed=0).tolist() == [[0, 2]]
    with pytest.raises(SaturationError):
        sample_negatives(g, 2, seed=0)
    with pytest.raises(SaturationError):
        sample_negatives(g, 1, seed=0, forbidden=[(2, 0)])


def test_negatives_avoid_edges_and_forbidden_pairs():
    rng = np.random.default_rng(0)
    g = Graph.from_edges(80, random_edges(rng, 80, 0.1))
    forbidden = [(0, 5), (3, 9)]
    neg = sample_negatives(g, 1000, seed=1, forbidden=forbidden)
    keys = {tuple(p) for p in neg.tolist()}
    assert len(keys) == 1000
    assert not any(g.has_edge(u, v) or u == v for u, v in keys)
    assert not keys & {(0, 5), (3, 9)}
    assert np.array_equal(neg, sample_negatives(g, 1000, seed=1, forbidden=forbidden))


# -- metrics ------------------------------------------------------------------

def test_hits_trivial_cases():
    assert evaluate_hits_at_k([5.0], [1.0, 2.0, 3.0], 1) == 1.0
    assert evaluate_hits_at_k([0.0], [1.0, 2.0, 3.0], 3) == 0.0
    assert evaluate_hits_at_k([3.0], [1.0, 2.0, 3.0], 1) == 0.0  # tie is not a hit
    assert evaluate_hits_at_k([0.0], [1.0], 5) == 1.0
    with pytest.raises(InvalidInputError):
        evaluate_hits_at_k([], [1.0], 1)


def test_mrr_ties_rank_pessimistically():
    assert evaluate_mrr([1.0], [[0.0, 0.0]]) == 1.0
    assert evaluate_mrr([1.0], [[1.0, 0.0]]) == 0.5
    assert evaluate_mrr([1.0, 0.0], [[2.0, 3.0], [1.0, 1.0]]) == pytest.approx(1 / 3)
    with pytest.raises(InvalidInputError):
        evaluate_mrr([1.0], [[1.0], [2.0]])


def test_auc_reference_values():
    assert evaluate_auc([1, 2], [0, 0]) == 1.0
    assert evaluate_auc([1], [1]) == 0.5
    assert evaluate_auc([0], [1]) == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_metrics_match_sort_based_oracles(seed):
    rng = np.random.default_rng(seed)
    pos = rng.integers(0, 6, size=int(rng.integers(1, 30))).astype(float)
    neg = rng.integers(0, 6, size=int(rng.integers(1, 60))).astype(float)
    for k in (1, 3, 10, 100):
        assert evaluate_hits_at_k(pos, neg, k) == hits_at_k_sorted(pos, neg, k)
    rows = rng.integers(0, 6, size=(len(pos), 7)).astype(float)
    assert evaluate_mrr(pos, rows) == mrr_sorted(pos, rows)
    assert evaluate_auc(pos, neg) == pytest.approx(auc_pairwise(pos, neg), abs=1e-12)


def test_hits_monotone_in_k_and_order_free():
    rng = np.random.default_rng(9)
    pos, neg = rng.normal(size=50), rng.normal(size=200)
    values = [evaluate_hits_at_k(pos, neg, k) for k in (1, 5, 20, 100)]
    assert values == sorted(values)
    assert evaluate_hits_at_k(rng.permutation(pos), rng.permutation(neg), 20) == values[2]


def test_report_serialization():
    rep = evaluate_scores([2.0, 1.0], [0.0, 1.5], ks=(1,), mrr_neg=[[0.0], [3.0]])
    doc = json.loads(rep.to_json())
    assert doc["hits_at_k"] == {"1": 0.5} and doc["mrr"] == 0.75 and doc["auc"] == 0.75
    assert "Hits@1" in rep.table()


def test_loss_curve_format():
    text = format_loss_curve([0.5, 0.25], {"lr": 0.1})
    assert text.splitlines() == ['# config {"lr": 0.1}', "epoch,loss", "1,0.5", "2,0.25"]


# -- synthetic benchmark ------------------------------------------------------

def test_benchmark_invariants(bench):
    g, splits = bench
    splits.validate(g)
    nbrs = [set(g.neighbors(u).tolist()) for u in range(g.num_nodes)]
    for u, v in np.concatenate([splits.valid_pos, splits.test_pos]).tolist():
        assert not g.has_edge(u, v) and len(nbrs[u] & nbrs[v]) >= 2
    for u, v in np.concatenate([splits.valid_neg, splits.test_neg]).tolist():
        assert not g.has_edge(u, v) and not nbrs[u] & nbrs[v]
    for (u, _), row in zip(splits.test_pos.tolist(), splits.test_mrr_neg.tolist()):
        assert all(not nbrs[u] & nbrs[w] and not g.has_edge(u, w) for w in row)
    report = evaluate_model(None, g, splits, scorer=lambda gr, p: score_heuristic(gr, p, "cn"))
    assert report.auc == 1.0 and report.mrr == 1.0


def test_benchmark_is_seeded():
    kw = dict(n=120, seed=5, n_valid=10, n_test=10, n_neg=30, mrr_candidates=5)
    a = generate_synthetic_benchmark(**kw)
    b = generate_synthetic_benchmark(**kw)
    assert np.array_equal(a[0].edges(), b[0].edges())
    assert np.array_equal(a[1].test_mrr_neg, b[1].test_mrr_neg)


def test_benchmark_reports_too_few_candidates():
    with pytest.raises(SaturationError):
        generate_synthetic_benchmark(n=120, seed=5, n_valid=10, n_test=10, n_neg=30, mrr_candidates=20)


def test_validate_rejects_overlap_and_positive_negatives(bench):
    g, splits = bench
    bad = SplitDataset(splits.train_pos, splits.valid_pos, splits.valid_pos[:3])
    with pytest.raises(InvalidInputError):
        bad.validate(g)
    bad = SplitDataset(splits.train_pos, splits.valid_pos, splits.test_pos,
                       test_neg=splits.test_pos[:1])
    with pytest.raises(InvalidInputError):
        bad.validate(g)
    bad = SplitDataset(splits.valid_pos, splits.test_pos[:1], splits.test_pos[1:])
    with pytest.raises(InvalidInputError):
        bad.validate(g)


# -- training -----------------------------------------------------------------

def test_zero_learning_rate_leaves_parameters_unchanged(bench):
    g, splits = bench
    cfg = SegConfig(**SMALL, lr=0.0, epochs=2, pos_fraction=0.05)
    model = SegModel(cfg, g.feature_dim)
    before = {k: t.data.copy() for k, t in model.params.items()}
    res = train(g, splits, cfg, model=model, threads=1)
    assert len(res.loss_curve) == 2
    for k, t in model.params.items():
        assert np.array_equal(before[k], t.data)


def test_training_is_deterministic_and_reduces_loss(bench):
    g, splits = bench
    cfg = SegConfig(**SMALL, lr=5e-3, epochs=4, pos_fraction=0.2)
    seen = []
    a = train(g, splits, cfg, threads=1, on_epoch=lambda e, v: seen.append(e))
    b = train(g, splits, cfg, threads=2)
    assert a.loss_curve == b.loss_curve
    assert seen == [1, 2, 3, 4]
    assert all(math.isfinite(v) for v in a.loss_curve)
    assert a.loss_curve[-1] < a.loss_curve[0]


@pytest.mark.parametrize("kind, variant", [("seg", "seg-se"), ("seg", "seg-gnn"), ("mlp", "seg")])
def test_variants_train_and_evaluate(bench, kind, variant):
    g, splits = bench
    cfg = SegConfig(**SMALL, variant=variant, epochs=1, pos_fraction=0.05)
    res = train(g, splits, cfg, kind=kind, threads=1)
    report = evaluate_model(res.model, g, splits, ks=(5,), threads=1)
    assert 0.0 <= report.auc <= 1.0
    assert report.pos_scores.shape == (20,) and report.neg_scores.shape == (60,)


def test_train_on_valid_adds_edges(bench):
    g, splits = bench
    cfg = SegConfig(**SMALL, epochs=1, train_on_valid=True)
    res = train(g, splits, cfg, threads=1)
    assert res.graph.num_edges == g.num_edges + len(splits.valid_pos)
