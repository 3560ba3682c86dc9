"""
Path labels versus distance labels
==================================

A walk through the structure side of seglink on a seven-node toy graph:
extract the enclosing subgraph of a target pair, enumerate the short simple
paths between the targets, and turn those paths into node labels.

Run with ``python demos/labeling_walkthrough.py``.
"""

import numpy as np

from seglink.fixtures import TOY_NAMES, toy_graph
from seglink.graph import extract_enclosing_subgraph
from seglink.structure import drnl_label, enumerate_simple_paths, one_hot_encode, path_label

# The toy graph has targets a and b. c is a common neighbor, d and e sit on a
# 3-edge route, f hangs off a and d, and g only touches a.

g = toy_graph()
for u in range(g.num_nodes):
    nbrs = " ".join(TOY_NAMES[v] for v in g.neighbors(u))
    print(f"{TOY_NAMES[u]}: {nbrs}")

# ## The enclosing subgraph
#
# One hop around each target already covers the whole graph. The targets
# come first in local order, the rest follow by global id.

sub = extract_enclosing_subgraph(g, 0, 1, k=1)
print("\nlocal order:", [TOY_NAMES[u] for u in sub.local_to_global])


def name(path):
    return "-".join(TOY_NAMES[sub.local_to_global[u]] for u in path)


# ## Simple paths up to four edges
#
# Depth-first search with a distance bound. A branch is cut as soon as the
# remaining budget cannot reach b, so only useful prefixes are expanded.

paths = enumerate_simple_paths(sub, max_len=4)
for p in sorted(paths.paths, key=len):
    print(f"  {len(p) - 1} edges: {name(p)}")
print("paths by length:", paths.counts_by_length())

# ## Path labels
#
# Each node gets one less than the length of the shortest path through it.
# Nodes on no path (here g) get the fringe label, which equals the path budget.

pl = path_label(sub, paths, lam=4)
print("\npath labels:")
for u, label in zip(sub.local_to_global, pl.labels):
    print(f"  {TOY_NAMES[u]} -> {label}")

# d and e share a label because both lie on a-d-e-b. Only the message
# passing that follows can tell them apart.

onehot = one_hot_encode(pl, lam=4)
print("\none-hot rows for d and e identical:", np.array_equal(onehot[3], onehot[4]))

# ## Distance labels for comparison
#
# The distance-based scheme hashes the pair of distances to the targets, so
# the label alphabet grows with subgraph depth.

dl = drnl_label(sub)
print("\ndistance labels:")
for u, label in zip(sub.local_to_global, dl.labels):
    print(f"  {TOY_NAMES[u]} -> {label}")
print("distinct labels: path", len(set(pl.labels.tolist())), "distance", len(set(dl.labels.tolist())))
