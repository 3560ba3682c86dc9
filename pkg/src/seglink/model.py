"""The SEG link predictor and a features-only MLP baseline.

SEG runs two branches on the enclosing subgraph of a target pair:

* a structure encoder (path labels -> one-hot -> one GCN layer -> MLP)
  whose per-node embeddings ``z`` give a structural logit through an MLP
  on ``z_a * z_b``;
* a GraphSAGE backbone fed with ``MLP(proj(x) + proj(z))`` whose
  layer outputs are concatenated, sort-pooled and scored by a second MLP.

The two logits are added and squashed, so the combined score stays a valid
probability for the cross-entropy loss.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import ShapeError
from .graph import EnclosingSubgraph, Graph, extract_enclosing_subgraph
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.checkpoint import dumps_checkpoint, loads_checkpoint
from .nn.layers import (bce_loss, gcn_layer, gcn_normalized_adjacency, linear,
                        mean_aggregation_matrix, mlp, sage_layer, sort_pooling)
from .nn.optim import ParamStore
from .structure import DEFAULT_MAX_PATHS, label_subgraph, one_hot_encode

VARIANTS = ("seg", "seg-se", "seg-gnn")


@dataclass
class SegConfig:
    """Architecture and training hyperparameters.

    ``embed_dim`` is both the structural embedding width and the fusion
    width, so the same ``z`` feeds the structure head and the fusion MLP.
    ``variant`` selects the full model or an ablation: ``seg-se`` scores
    with the structure branch alone, ``seg-gnn`` keeps the encoder only as
    fusion input and drops the structural logit.
    """

    lam: int = 4
    hops: int = 1
    labeling: str = "pl"
    drnl_max_label: int = 16
    max_paths: int = DEFAULT_MAX_PATHS
    struct_gcn_dim: int = 32
    struct_mlp_layers: int = 3
    embed_dim: int = 32
    backbone: str = "sage"
    gnn_layers: int = 3
    gnn_dim: int = 32
    fusion_mlp_layers: int = 2
    sortpool_k: int = 10
    predictor_layers: int = 2
    predictor_dim: int = 128
    variant: str = "seg"
    exclude_target_edge: bool = True
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 50
    pos_fraction: float = 0.05
    neg_ratio: int = 1
    train_on_valid: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.lam < 2:
            raise ValueError("lam must be >= 2 so a common neighbor gets its own label")
        widths = (self.struct_gcn_dim, self.embed_dim, self.gnn_dim, self.predictor_dim,
                  self.sortpool_k, self.gnn_layers, self.struct_mlp_layers,
                  self.fusion_mlp_layers, self.predictor_layers, self.hops)
        if min(widths) < 1:
            raise ValueError("all widths, layer counts and hops must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.labeling not in ("pl", "drnl"):
            raise ValueError("labeling must be 'pl' or 'drnl'")
        if self.backbone not in ("sage", "gcn"):
            raise ValueError("backbone must be 'sage' or 'gcn'")

    @property
    def label_width(self) -> int:
        return (self.lam if self.labeling == "pl" else self.drnl_max_label) + 1

    @property
    def uses_structure_head(self) -> bool:
        return self.variant in ("seg", "seg-se")

    @property
    def uses_semantic_head(self) -> bool:
        return self.variant in ("seg", "seg-gnn")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SegConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SegOutput:
    s: float
    s_semantic: Optional[float]
    s_structure: Optional[float]
    z: np.ndarray


@dataclass
class PreparedPair:
    """Everything about a target pair that does not depend on parameters."""

    pair: tuple
    sub: EnclosingSubgraph
    labels: np.ndarray
    onehot: np.ndarray
    a_gcn: np.ndarray
    a_backbone: np.ndarray
    x: Optional[np.ndarray]


@dataclass
class ForwardResult:
    logit: Tensor
    logit_semantic: Optional[Tensor]
    logit_structure: Optional[Tensor]
    z: Tensor


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _mlp_params(params: ParamStore, prefix: str, widths: List[int], rng) -> None:
    for idx, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        params.init_uniform(f"{prefix}.{idx}.W", (fan_in, fan_out), fan_in, rng)
        params.init_uniform(f"{prefix}.{idx}.b", (1, fan_out), fan_in, rng)


def _mlp_apply(params: ParamStore, prefix: str, h: Tensor, layers: int) -> Tensor:
    ws = [params[f"{prefix}.{i}.W"] for i in range(layers)]
    bs = [params[f"{prefix}.{i}.b"] for i in range(layers)]
    return mlp(h, ws, bs)


def init_seg_params(cfg: SegConfig, feature_dim: int) -> ParamStore:
    """Uniform(+-1/sqrt(fan_in)) initialization, seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    p = ParamStore()
    m, hid = cfg.embed_dim, cfg.predictor_dim
    p.init_uniform("struct.gcn.W", (cfg.label_width, cfg.struct_gcn_dim), cfg.label_width, rng)
    p.init_uniform("struct.gcn.b", (1, cfg.struct_gcn_dim), cfg.label_width, rng)
    _mlp_params(p, "struct.mlp", [cfg.struct_gcn_dim] + [m] * cfg.struct_mlp_layers, rng)
    if cfg.uses_structure_head:
        _mlp_params(p, "struct.head", [m] + [hid] * (cfg.predictor_layers - 1) + [1], rng)
    if cfg.uses_semantic_head:
        if feature_dim > 0:
            p.init_uniform("fuse.x.W", (feature_dim, m), feature_dim, rng)
        p.init_uniform("fuse.z.W", (m, m), m, rng)
        _mlp_params(p, "fuse.mlp", [m] * (cfg.fusion_mlp_layers + 1), rng)
        fan_in = m
        for layer in range(cfg.gnn_layers):
            if cfg.backbone == "sage":
                p.init_uniform(f"gnn.{layer}.W_self", (fan_in, cfg.gnn_dim), fan_in, rng)
                p.init_uniform(f"gnn.{layer}.W_neigh", (fan_in, cfg.gnn_dim), fan_in, rng)
            else:
                p.init_uniform(f"gnn.{layer}.W", (fan_in, cfg.gnn_dim), fan_in, rng)
            p.init_uniform(f"gnn.{layer}.b", (1, cfg.gnn_dim), fan_in, rng)
            fan_in = cfg.gnn_dim
        pooled = cfg.sortpool_k * cfg.gnn_layers * cfg.gnn_dim
        _mlp_params(p, "sem.head", [pooled] + [hid] * (cfg.predictor_layers - 1) + [1], rng)
    return p


# -- pipeline stages ----------------------------------------------------------

def prepare_pair(g: Graph, i: int, j: int, cfg: SegConfig) -> PreparedPair:
    sub = extract_enclosing_subgraph(g, i, j, cfg.hops, cfg.exclude_target_edge)
    lam = cfg.lam if cfg.labeling == "pl" else cfg.drnl_max_label
    la = label_subgraph(sub, cfg.labeling, lam, cfg.max_paths)
    adj = sub.local_graph.dense_adjacency()
    a_gcn = gcn_normalized_adjacency(adj)
    a_backbone = mean_aggregation_matrix(adj) if cfg.backbone == "sage" else a_gcn
    x = sub.local_graph.features
    return PreparedPair((i, j), sub, la.labels, one_hot_encode(la, lam), a_gcn, a_backbone, x)


def structure_encode(prep: PreparedPair, cfg: SegConfig, params: ParamStore) -> Tensor:
    """Per-node structural embeddings ``z`` (num_local_nodes x embed_dim)."""
    h = gcn_layer(prep.a_gcn, Tensor(prep.onehot), params["struct.gcn.W"], params["struct.gcn.b"],
                  normalized=True)
    return _mlp_apply(params, "struct.mlp", h, cfg.struct_mlp_layers)


def structure_logit(z_i: Tensor, z_j: Tensor, cfg: SegConfig, params: ParamStore) -> Tensor:
    if z_i.shape != z_j.shape:
        raise ShapeError(f"structural embeddings differ in shape: {z_i.shape} vs {z_j.shape}")
    return _mlp_apply(params, "struct.head", ad.mul(z_i, z_j), cfg.predictor_layers)


def structure_score(z_i: Tensor, z_j: Tensor, cfg: SegConfig, params: ParamStore) -> float:
    """``sigmoid(MLP(z_i * z_j))`` for 1 x m embedding rows."""
    return _sigmoid(structure_logit(z_i, z_j, cfg, params).item())


def fuse_features(x: Optional[np.ndarray], z: Tensor, cfg: SegConfig, params: ParamStore) -> Tensor:
    """``MLP(x W_x + z W_z)``; the ``x`` term is dropped for featureless graphs."""
    fused = linear(z, params["fuse.z.W"])
    if x is not None and "fuse.x.W" in params:
        if x.shape[0] != z.shape[0]:
            raise ShapeError(f"feature rows {x.shape[0]} != embedding rows {z.shape[0]}")
        fused = ad.add(fused, linear(Tensor(x), params["fuse.x.W"]))
    return _mlp_apply(params, "fuse.mlp", fused, cfg.fusion_mlp_layers)


def semantic_logit(prep: PreparedPair, x_tilde: Tensor, cfg: SegConfig, params: ParamStore) -> Tensor:
    h = x_tilde
    outputs = []
    for layer in range(cfg.gnn_layers):
        if cfg.backbone == "sage":
            h = sage_layer(prep.a_backbone, h, params[f"gnn.{layer}.W_self"],
                           params[f"gnn.{layer}.W_neigh"], params[f"gnn.{layer}.b"], normalized=True)
        else:
            h = gcn_layer(prep.a_backbone, h, params[f"gnn.{layer}.W"], params[f"gnn.{layer}.b"],
                          normalized=True)
        outputs.append(h)
    pooled = sort_pooling(ad.concat(outputs, axis=1), cfg.sortpool_k)
    flat = ad.reshape(pooled, (1, -1))
    return _mlp_apply(params, "sem.head", flat, cfg.predictor_layers)


def semantic_score(prep: PreparedPair, x_tilde: Tensor, cfg: SegConfig, params: ParamStore) -> float:
    return _sigmoid(semantic_logit(prep, x_tilde, cfg, params).item())


def seg_forward(prep: PreparedPair, cfg: SegConfig, params: ParamStore) -> ForwardResult:
    z = structure_encode(prep, cfg, params)
    a, b = prep.sub.target_a, prep.sub.target_b
    l_struct = l_sem = None
    if cfg.uses_structure_head:
        l_struct = structure_logit(ad.take(z, [a]), ad.take(z, [b]), cfg, params)
    if cfg.uses_semantic_head:
        l_sem = semantic_logit(prep, fuse_features(prep.x, z, cfg, params), cfg, params)
    if l_struct is not None and l_sem is not None:
        logit = ad.add(l_sem, l_struct)
    else:
        logit = l_sem if l_sem is not None else l_struct
    return ForwardResult(logit, l_sem, l_struct, z)


def predict_link(g: Graph, i: int, j: int, cfg: SegConfig, params: ParamStore) -> SegOutput:
    out = seg_forward(prepare_pair(g, i, j, cfg), cfg, params)
    return SegOutput(
        s=_sigmoid(out.logit.item()),
        s_semantic=None if out.logit_semantic is None else _sigmoid(out.logit_semantic.item()),
        s_structure=None if out.logit_structure is None else _sigmoid(out.logit_structure.item()),
        z=out.z.data.copy(),
    )


def seg_loss(scores, labels):
    """Mean cross-entropy of combined scores.

    ``scores`` is either a probability :class:`Tensor` (differentiable path)
    or a sequence of :class:`SegOutput` (returns a float).
    """
    if isinstance(scores, Tensor):
        return bce_loss(scores, labels)
    s = Tensor(np.array([o.s for o in scores], dtype=np.float64))
    return bce_loss(s, labels).item()


# -- model objects used by the training harness -------------------------------

class SegModel:
    kind = "seg"

    def __init__(self, cfg: SegConfig, feature_dim: int, params: Optional[ParamStore] = None):
        self.cfg = cfg
        self.feature_dim = feature_dim
        self.params = params if params is not None else init_seg_params(cfg, feature_dim)

    def prepare(self, g: Graph, i: int, j: int) -> PreparedPair:
        return prepare_pair(g, i, j, self.cfg)

    def logit(self, prep: PreparedPair) -> Tensor:
        return seg_forward(prep, self.cfg, self.params).logit

    def forward(self, prep: PreparedPair) -> ForwardResult:
        return seg_forward(prep, self.cfg, self.params)

    def predict_link(self, g: Graph, i: int, j: int) -> SegOutput:
        return predict_link(g, i, j, self.cfg, self.params)

    def config_dict(self) -> dict:
        return {"model": self.kind, "feature_dim": self.feature_dim, **self.cfg.to_dict()}


class FeatureMLPModel:
    """Scores a pair from raw node features only: ``MLP(x_i * x_j)``."""

    kind = "mlp"

    def __init__(self, cfg: SegConfig, feature_dim: int, params: Optional[ParamStore] = None):
        if feature_dim < 1:
            raise ValueError("the features-only baseline needs node features")
        self.cfg = cfg
        self.feature_dim = feature_dim
        if params is None:
            rng = np.random.default_rng(cfg.seed)
            params = ParamStore()
            _mlp_params(params, "mlp", [feature_dim, cfg.predictor_dim, cfg.predictor_dim, 1], rng)
        self.params = params

    def prepare(self, g: Graph, i: int, j: int):
        return (i, j), g.features[[i]], g.features[[j]]

    def logit(self, prep) -> Tensor:
        _, xi, xj = prep
        return _mlp_apply(self.params, "mlp", Tensor(xi * xj), 3)

    def predict_link(self, g: Graph, i: int, j: int) -> SegOutput:
        s = _sigmoid(self.logit(self.prepare(g, i, j)).item())
        return SegOutput(s, s, None, np.zeros((0, 0)))

    def config_dict(self) -> dict:
        return {"model": self.kind, "feature_dim": self.feature_dim, **self.cfg.to_dict()}


MODEL_KINDS = {"seg": SegModel, "mlp": FeatureMLPModel}


def build_model(kind: str, cfg: SegConfig, feature_dim: int):
    return MODEL_KINDS[kind](cfg, feature_dim)


def save_model(model, extra: Optional[dict] = None) -> str:
    return dumps_checkpoint(model.params, model.config_dict(), extra)


def load_model(text: str):
    """Inverse of :func:`save_model`; returns ``(model, checkpoint document)``."""
    config, values, doc = loads_checkpoint(text)
    config = dict(config)
    kind = config.pop("model")
    feature_dim = config.pop("feature_dim")
    cfg = SegConfig.from_dict(config)
    model = MODEL_KINDS[kind](cfg, feature_dim)
    if set(values) != set(model.params.keys()):
        raise ValueError("checkpoint parameters do not match the configured architecture")
    for name, arr in values.items():
        model.params.set_value(name, arr)
    model.params.step = int(doc.get("optimizer_step", 0))
    return model, doc


def config_echo(model) -> str:
    return json.dumps(model.config_dict(), sort_keys=True)
