"""Layer functions used by the SEG model.

Layers are plain functions over :class:`Tensor` inputs and parameter
tensors; graph structure enters as constant dense matrices, which is cheap
at enclosing-subgraph sizes.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import InvalidInputError, ShapeError
from . import autodiff as ad
from .autodiff import Tensor

BCE_CLAMP = 1e-12


def gcn_normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with degrees taken from ``A + I``."""
    a_hat = adj + np.eye(adj.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def mean_aggregation_matrix(adj: np.ndarray) -> np.ndarray:
    """Row-normalized adjacency; rows of isolated nodes stay zero."""
    deg = adj.sum(axis=1)
    scale = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return adj * scale[:, None]


def _check_rows(adj: np.ndarray, h: Tensor, layer: str):
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] != h.shape[0]:
        raise ShapeError(f"{layer}: adjacency {adj.shape} does not match features {h.shape}")


def linear(h: Tensor, w: Tensor, b: Tensor = None) -> Tensor:
    if h.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input width {h.shape[-1]} != weight rows {w.shape[0]}")
    out = ad.matmul(h, w)
    return out if b is None else ad.add(out, b)


def gcn_layer(adj: np.ndarray, h: Tensor, w: Tensor, b: Tensor = None, activation=ad.relu,
              normalized: bool = False) -> Tensor:
    """``relu(Â H W + b)`` with self-loop symmetric normalization.

    Pass ``normalized=True`` when ``adj`` is already ``Â``.
    """
    _check_rows(adj, h, "gcn_layer")
    a_hat = adj if normalized else gcn_normalized_adjacency(adj)
    out = linear(ad.matmul(ad.as_tensor(a_hat), h), w, b)
    return activation(out) if activation is not None else out


def sage_layer(adj: np.ndarray, h: Tensor, w_self: Tensor, w_neigh: Tensor, b: Tensor = None,
               activation=ad.relu, normalized: bool = False) -> Tensor:
    """Mean-aggregator GraphSAGE: ``relu(H W_self + mean_N(H) W_neigh + b)``.

    An empty neighborhood contributes a zero vector.
    """
    _check_rows(adj, h, "sage_layer")
    agg = adj if normalized else mean_aggregation_matrix(adj)
    out = ad.add(linear(h, w_self), linear(ad.matmul(ad.as_tensor(agg), h), w_neigh))
    if b is not None:
        out = ad.add(out, b)
    return activation(out) if activation is not None else out


def sort_order(values: np.ndarray) -> np.ndarray:
    """Row order for SortPooling.

    Descending by the last channel, ties broken by the next-to-last channel
    and so on down to the first, then by ascending row index.
    """
    # lexsort treats the last key row as primary
    keys = np.vstack([np.arange(len(values)), -values.T])
    return np.lexsort(keys)


def sort_pooling(h: Tensor, k: int) -> Tensor:
    """Keep the top ``k`` rows of ``h`` in :func:`sort_order`; zero-pad to ``k`` rows."""
    if k < 1:
        raise ValueError("sortpool k must be >= 1")
    order = sort_order(h.data)[:k]
    out = ad.take(h, order)
    return ad.pad_rows(out, k - len(order))


def mlp(h: Tensor, weights: Sequence[Tensor], biases: Sequence[Tensor], activation=ad.relu) -> Tensor:
    """Affine layers with ``activation`` between them; the last layer is linear."""
    if len(weights) != len(biases):
        raise ShapeError("mlp: weights and biases must pair up")
    for idx, (w, b) in enumerate(zip(weights, biases)):
        h = linear(h, w, b)
        if idx < len(weights) - 1:
            h = activation(h)
    return h


def bce_loss(scores: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy of probabilities ``scores`` against 0/1 ``labels``.

    Scores are clamped to ``[1e-12, 1 - 1e-12]`` before the logs.
    """
    y = np.asarray(labels, dtype=scores.data.dtype).reshape(scores.shape)
    if y.size == 0:
        raise InvalidInputError("bce_loss needs a non-empty batch")
    s = ad.clip(scores, BCE_CLAMP, 1.0 - BCE_CLAMP)
    per_item = ad.neg(ad.add(ad.mul(y, ad.log(s)), ad.mul(1.0 - y, ad.log(ad.add(1.0, ad.neg(s))))))
    return ad.mean(per_item)
