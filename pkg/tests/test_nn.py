import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seglink.errors import DeterminismError, InvalidInputError, NumericError, ShapeError
from seglink.nn import autodiff as ad
from seglink.nn.autodiff import Tensor, grad
from seglink.nn.checkpoint import dumps_checkpoint, loads_checkpoint
from seglink.nn.gradcheck import finite_diff_check
from seglink.nn.layers import (bce_loss, gcn_layer, mlp, sage_layer, sort_order, sort_pooling)
from seglink.nn.optim import ParamStore, adam_step

from .oracles import central_difference


def _random_adj(rng, n, p=0.4):
    a = (rng.random((n, n)) < p).astype(float)
    a = np.triu(a, 1)
    return a + a.T


def test_grad_of_sum_wx_is_outer_structure():
    ps = ParamStore()
    ps.add("W", np.arange(6.0).reshape(2, 3))
    x = np.array([[1.0, -2.0]])
    loss = ad.tsum(ad.matmul(Tensor(x), ps["W"]))
    g = grad(loss, ps)["W"]
    assert np.array_equal(g, np.repeat(x.T, 3, axis=1))
    assert np.array_equal(ps["W"].data, np.arange(6.0).reshape(2, 3))


def test_loss_must_be_scalar():
    ps = ParamStore()
    ps.add("W", np.ones((2, 2)))
    with pytest.raises(ShapeError):
        grad(ad.mul(ps["W"], 2.0), ps)


def test_nan_names_the_producing_op():
    with pytest.raises(NumericError, match="log"):
        ad.log(Tensor(np.array([-1.0])))


def test_dead_relu_blocks_gradient():
    ps = ParamStore()
    ps.add("W1", np.zeros((3, 4)))
    ps.add("b1", np.zeros((1, 4)))
    ps.add("W2", np.ones((4, 1)))
    x = Tensor(np.ones((2, 3)))
    loss = ad.tsum(ad.matmul(ad.relu(ad.add(ad.matmul(x, ps["W1"]), ps["b1"])), ps["W2"]))
    g = grad(loss, ps)
    assert not g["W1"].any() and not g["b1"].any()


def test_three_layer_mlp_gradients_match_central_differences():
    rng = np.random.default_rng(0)
    ps = ParamStore()
    widths = [5, 7, 6, 1]
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        ps.init_uniform(f"W{i}", (a, b), a, rng)
        ps.init_uniform(f"b{i}", (1, b), a, rng)
    x = rng.normal(size=(4, 5))
    y = np.array([[1.0], [0.0], [1.0], [0.0]])

    def loss():
        h = mlp(Tensor(x), [ps[f"W{i}"] for i in range(3)], [ps[f"b{i}"] for i in range(3)])
        return bce_loss(ad.sigmoid(h), y)

    analytic = grad(loss(), ps)
    for name, p in ps.items():
        numeric = central_difference(lambda: loss().item(), p.data)
        rel = np.abs(analytic[name] - numeric) / np.maximum(
            np.maximum(np.abs(analytic[name]), np.abs(numeric)), 1e-8)
        assert rel.max() <= 1e-4, name


# -- layers vs dense oracles ---------------------------------------------------

def test_gcn_isolated_node_identity():
    h = Tensor(np.array([[0.5, 2.0]]))
    out = gcn_layer(np.zeros((1, 1)), h, Tensor(np.eye(2)))
    assert np.array_equal(out.data, h.data)


def test_gcn_two_nodes_half_mix():
    out = gcn_layer(np.array([[0.0, 1.0], [1.0, 0.0]]), Tensor(np.eye(2)), Tensor(np.eye(2)))
    assert np.allclose(out.data, 0.5, atol=1e-15, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_gcn_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    adj = _random_adj(rng, n)
    h, w, b = rng.normal(size=(n, 4)), rng.normal(size=(4, 3)), rng.normal(size=(1, 3))
    deg = adj.sum(1) + 1
    a_hat = (adj + np.eye(n)) / np.sqrt(np.outer(deg, deg))
    expected = np.maximum(a_hat @ h @ w + b, 0)
    got = gcn_layer(adj, Tensor(h), Tensor(w), Tensor(b)).data
    assert np.max(np.abs(got - expected)) <= 1e-10


def test_sage_isolated_and_star():
    rng = np.random.default_rng(1)
    ws, wn = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    h = rng.normal(size=(1, 3))
    out = sage_layer(np.zeros((1, 1)), Tensor(h), Tensor(ws), Tensor(wn))
    assert np.allclose(out.data, np.maximum(h @ ws, 0), atol=1e-15, rtol=0)

    leaf = rng.normal(size=3)
    star = np.zeros((5, 5))
    star[0, 1:] = star[1:, 0] = 1
    hs = np.vstack([rng.normal(size=3)] + [leaf] * 4)
    out = sage_layer(star, Tensor(hs), Tensor(ws), Tensor(wn), activation=None)
    assert np.allclose(out.data[0], hs[0] @ ws + leaf @ wn, atol=1e-14, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_sage_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    adj = _random_adj(rng, n, 0.3)
    h = rng.normal(size=(n, 4))
    ws, wn, b = rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), rng.normal(size=(1, 3))
    expected = np.zeros((n, 3))
    for u in range(n):
        nb = np.nonzero(adj[u])[0]
        agg = h[nb].mean(axis=0) if len(nb) else np.zeros(4)
        expected[u] = np.maximum(h[u] @ ws + agg @ wn + b[0], 0)
    got = sage_layer(adj, Tensor(h), Tensor(ws), Tensor(wn), Tensor(b)).data
    assert np.max(np.abs(got - expected)) <= 1e-10


def test_mlp_zero_and_identity():
    x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    zero = mlp(x, [Tensor(np.zeros((4, 4))), Tensor(np.zeros((4, 2)))],
               [Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 2)))])
    assert not zero.data.any()
    ident = mlp(x, [Tensor(np.eye(4))], [Tensor(np.zeros((1, 4)))])
    assert np.array_equal(ident.data, x.data)
    with pytest.raises(ShapeError):
        mlp(x, [Tensor(np.eye(3))], [Tensor(np.zeros((1, 3)))])


@pytest.mark.parametrize("seed", range(3))
def test_mlp_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 6))
    ws = [rng.normal(size=(6, 8)), rng.normal(size=(8, 8)), rng.normal(size=(8, 2))]
    bs = [rng.normal(size=(1, 8)), rng.normal(size=(1, 8)), rng.normal(size=(1, 2))]
    h = x
    for i, (w, b) in enumerate(zip(ws, bs)):
        h = h @ w + b
        if i < 2:
            h = np.maximum(h, 0)
    got = mlp(Tensor(x), [Tensor(w) for w in ws], [Tensor(b) for b in bs]).data
    assert np.max(np.abs(got - h)) <= 1e-10


# -- sort pooling ----------------------------------------------------------------

def test_sortpool_pads_with_zero_rows():
    out = sort_pooling(Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])), 3)
    assert out.shape == (3, 2)
    assert (out.data == 0).all(axis=1).tolist() == [False, False, True]


def test_sortpool_orders_by_last_channel():
    h = np.array([[0.0, 0.1], [0.0, 0.9], [0.0, 0.5]])
    out = sort_pooling(Tensor(h), 2)
    assert out.data.tolist() == [[0.0, 0.9], [0.0, 0.5]]


def test_sortpool_tie_break_next_channel_then_index():
    h = np.array([[1.0, 0.0, 2.0], [1.0, 5.0, 2.0], [1.0, 5.0, 2.0], [9.0, 1.0, 2.0]])
    assert sort_order(h).tolist() == [1, 2, 3, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_sortpool_shape_and_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 10))
    h = rng.normal(size=(n, 3))
    out = sort_pooling(Tensor(h), k)
    assert out.shape == (k, 3)
    perm = rng.permutation(n)
    assert np.array_equal(sort_pooling(Tensor(h[perm]), k).data, out.data)


def test_sortpool_gradient_routes_to_kept_rows():
    ps = ParamStore()
    ps.add("H", np.array([[0.1, 0.3], [0.2, 0.9], [0.4, 0.5]]))
    g = grad(ad.tsum(sort_pooling(ps["H"], 2)), ps)["H"]
    assert g.tolist() == [[0, 0], [1, 1], [1, 1]]


# -- loss -----------------------------------------------------------------------

def test_bce_half_is_ln2():
    assert bce_loss(Tensor(np.array([0.5])), [1]).item() == pytest.approx(math.log(2), abs=1e-15)
    assert bce_loss(Tensor(np.array([0.5])), [0]).item() == pytest.approx(math.log(2), abs=1e-15)


def test_bce_matches_summation_oracle():
    rng = np.random.default_rng(5)
    s = rng.uniform(0.01, 0.99, size=50)
    y = rng.integers(0, 2, size=50)
    expected = sum(-yy * math.log(ss) - (1 - yy) * math.log(1 - ss) for ss, yy in zip(s, y)) / 50
    assert abs(bce_loss(Tensor(s), y).item() - expected) <= 1e-12


def test_bce_clamps_and_rejects_empty():
    assert bce_loss(Tensor(np.array([1.0, 0.0])), [1, 0]).item() == pytest.approx(1e-12, rel=1e-3)
    with pytest.raises(InvalidInputError):
        bce_loss(Tensor(np.zeros(0)), [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10), st.data())
def test_bce_nonnegative(scores, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    assert bce_loss(Tensor(np.array(scores)), labels).item() >= 0


# -- optimizer ------------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    ps = ParamStore()
    ps.add("w", np.array([1.0, -2.0]))
    adam_step(ps, {"w": np.zeros(2)}, lr=0.1)
    assert ps["w"].data.tolist() == [1.0, -2.0]
    assert ps.step == 1


def test_adam_first_step_closed_form():
    ps = ParamStore()
    ps.add("w", np.array([1.0, 1.0]))
    g = np.array([0.3, -4.0])
    adam_step(ps, {"w": g}, lr=0.01, eps=1e-8)
    # after bias correction m_hat = g, v_hat = g^2
    assert np.allclose(ps["w"].data, 1.0 - 0.01 * g / (np.abs(g) + 1e-8), atol=1e-15, rtol=0)


def test_adam_converges_on_quadratic():
    ps = ParamStore()
    ps.add("w", np.array([0.0]))
    for _ in range(200):
        w = ps["w"]
        loss = ad.tsum(ad.mul(ad.add(w, -3.0), ad.add(w, -3.0)))
        adam_step(ps, grad(loss, ps), lr=0.1)
    assert abs(ps["w"].data[0] - 3.0) < 1e-2


# -- finite-difference checker --------------------------------------------------

def _linear_problem():
    rng = np.random.default_rng(2)
    ps = ParamStore()
    ps.add("W", rng.normal(size=(3, 2)))
    x = rng.normal(size=(4, 3))
    return ps, lambda: ad.tsum(ad.matmul(Tensor(x), ps["W"]))


def test_gradcheck_linear_model():
    ps, f = _linear_problem()
    report = finite_diff_check(f, ps, tolerance=1e-8)
    assert report.passed and report.max_rel_error < 1e-8


def test_gradcheck_flags_corrupted_gradient():
    ps, f = _linear_problem()
    bad = grad(f(), ps)
    bad["W"] = bad["W"] * 1.01
    report = finite_diff_check(f, ps, tolerance=1e-4, analytic=bad)
    assert not report.passed and report.worst_param == "W"


def test_gradcheck_detects_nondeterminism():
    ps, f = _linear_problem()
    rng = np.random.default_rng(0)
    with pytest.raises(DeterminismError):
        finite_diff_check(lambda: ad.add(f(), rng.normal()), ps)


# -- checkpoint -----------------------------------------------------------------

def test_checkpoint_round_trip_is_bit_identical():
    rng = np.random.default_rng(9)
    ps = ParamStore()
    ps.add("a", rng.normal(size=(3, 4)) * 1e-7)
    ps.add("b", np.array([[np.pi, 1 / 3, -0.0, 5e-324]]))
    text = dumps_checkpoint(ps, {"lam": 4})
    config, values, doc = loads_checkpoint(text)
    assert config == {"lam": 4}
    for name, t in ps.items():
        assert values[name].tobytes() == t.data.tobytes()
    assert doc["format_version"] == 1
