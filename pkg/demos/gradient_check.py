"""
Checking the hand-written gradients
===================================

seglink ships its own reverse-mode autodiff on top of numpy. This script
compares the analytic gradient of a single-pair training loss with central
finite differences, first on a small model and then for a single layer.

Run with ``python demos/gradient_check.py``. Pass ``--full`` to check the
default-size model as well (about a minute).
"""

import argparse

import numpy as np

from seglink.fixtures import seg_gradient_check
from seglink.model import SegConfig
from seglink.nn import ParamStore, finite_diff_check, gcn_layer
from seglink.nn.layers import gcn_normalized_adjacency
from seglink.nn import autodiff as ad

parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
parser.add_argument("--full", action="store_true", help="also check the default-size model")
args = parser.parse_args()

# ## One GCN layer
#
# A 4-node cycle, random input, one weight matrix. The loss is a plain sum so
# every output entry contributes.

rng = np.random.default_rng(0)
adj = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float)
a_hat = gcn_normalized_adjacency(adj)
h = ad.Tensor(rng.normal(size=(4, 3)))
params = ParamStore()
params.add("W", rng.normal(size=(3, 2)))


def layer_loss():
    return ad.tsum(gcn_layer(a_hat, h, params["W"], normalized=True))


report = finite_diff_check(layer_loss, params)
print("GCN layer:", report.summary())

# ## The whole model, small widths
#
# Every parameter tensor is probed: a sample of single entries plus a few
# random directions covering the full tensor.

small = SegConfig(struct_gcn_dim=8, embed_dim=8, gnn_dim=8, predictor_dim=16, sortpool_k=6)
report = seg_gradient_check(small, max_entries_per_param=64, directions=2)
print("small model:", report.summary())
worst = sorted(report.per_param.items(), key=lambda kv: -kv[1])[:5]
for name, err in worst:
    print(f"  {name:20s} {err:.2e}")

if args.full:
    report = seg_gradient_check()
    print("default model:", report.summary())
