"""Small reference graphs used by the self-checks, tests and demos."""
from __future__ import annotations

import numpy as np

from .graph import Graph

TOY_NAMES = ("a", "b", "c", "d", "e", "f", "g")
TOY_EDGES = (("a", "c"), ("c", "b"), ("a", "d"), ("d", "e"), ("e", "b"),
             ("a", "f"), ("f", "d"), ("a", "g"))


def toy_graph(feature_dim: int = 0, seed: int = 0) -> Graph:
    """Seven-node graph with targets ``a=0`` and ``b=1``.

    Between the targets it has one path each of length 2 (through ``c``),
    3 (``d, e``) and 4 (``f, d, e``); ``g`` hangs off ``a``.
    """
    index = {name: i for i, name in enumerate(TOY_NAMES)}
    edges = [(index[u], index[v]) for u, v in TOY_EDGES]
    features = None
    if feature_dim:
        features = np.random.default_rng(seed).normal(size=(len(TOY_NAMES), feature_dim))
    return Graph.from_edges(len(TOY_NAMES), edges, features)


def seg_gradient_check(cfg=None, feature_dim: int = 3, tolerance: float = 1e-4,
                       max_entries_per_param: int = 4096, directions: int = 3):
    """Finite-difference check of the full SEG loss on the seven-node fixture."""
    from .model import SegConfig, SegModel, seg_loss
    from .nn import autodiff as ad
    from .nn.gradcheck import finite_diff_check

    cfg = cfg or SegConfig()
    g = toy_graph(feature_dim, seed=cfg.seed)
    model = SegModel(cfg, feature_dim)
    prep = model.prepare(g, 0, 1)

    def loss():
        return seg_loss(ad.sigmoid(model.logit(prep)), [[1.0]])

    return finite_diff_check(loss, model.params, tolerance,
                             max_entries_per_param=max_entries_per_param,
                             rng=np.random.default_rng(cfg.seed), directions=directions)
