"""Hierarchical pooling: information scores, Top-K hubs, feature aggregation.

A node's information score is the feature mass it receives over the
normalized signed adjacency: positive neighbors contribute the L1 norm of
their same-stream rows, negative neighbors the L1 norm of the opposite
stream.  The K highest-scoring nodes survive as hubs; every dropped node adds
its features onto the hub it attends to most strongly, then the graph is cut
down to the hub submatrix.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (
    EmptyKeptSet,
    IndexOutOfRange,
    KOutOfRange,
    ShapeMismatch,
)
from .bue_layer import NodeEmbedding, fuse
from .signal_io import FunctionalNetwork


@dataclass
class InfoScores:
    balanced: np.ndarray
    unbalanced: np.ndarray
    total: np.ndarray


@dataclass
class PoolConfig:
    ratio: float = 0.5
    layers: int = 3

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise KOutOfRange(f"ratio must be in (0, 1], got {self.ratio}")
        if self.layers < 1:
            raise KOutOfRange(f"layers must be positive, got {self.layers}")

    def k_at(self, n_nodes):
        return max(1, math.ceil(self.ratio * n_nodes))


@dataclass
class PooledGraph:
    network: FunctionalNetwork
    kept_indices: list
    assignment: dict = field(default_factory=dict)


def information_scores(norm, emb):
    """Weighted L1 feature mass per node from both sign neighborhoods."""
    balanced = emb.balanced.value if isinstance(emb.balanced, ad.Tensor) else emb.balanced
    unbalanced = (
        emb.unbalanced.value if isinstance(emb.unbalanced, ad.Tensor) else emb.unbalanced
    )
    n = norm.pos_norm.shape[0]
    if balanced.shape[0] != n or unbalanced.shape[0] != n:
        raise ShapeMismatch("embedding rows must match adjacency size")
    mass_b = np.abs(balanced).sum(axis=1)
    mass_u = np.abs(unbalanced).sum(axis=1)
    score_b = norm.pos_norm @ mass_b + norm.neg_norm @ mass_u
    score_u = norm.pos_norm @ mass_u + norm.neg_norm @ mass_b
    return InfoScores(score_b, score_u, score_b + score_u)


def select_topk(scores, k):
    """Indices of the K largest total scores, ties to the smaller index."""
    total = scores.total
    n = total.shape[0]
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    order = np.argsort(-total, kind="stable")
    return sorted(int(i) for i in order[:k])


def feature_attention(emb):
    """Pairwise inner products of fused node embeddings."""
    return emb.fused @ emb.fused.T


def aggregate_features(emb, kept, attn):
    """Fold dropped nodes onto their best-attended hub.

    Each dropped node u picks the kept hub h with the largest attention
    attn[u, h] (ties to the smallest hub index) and the hub's fused feature
    gains attn[u, h] * fused[u].  All contributions read from the embedding
    as it was before aggregation, so the outcome is order-independent.
    Returns the kept-row embedding and the {dropped: hub} assignment.
    """
    if len(kept) == 0:
        raise EmptyKeptSet("need at least one hub")
    n = emb.n_nodes
    kept = list(kept)
    kept_arr = np.asarray(kept, dtype=np.intp)
    dropped = [u for u in range(n) if u not in set(kept)]

    attn_vals = attn.value
    assignment = {}
    weight_mask = np.zeros((len(kept), n))
    for u in dropped:
        best = int(np.argmax(attn_vals[u, kept_arr]))  # first max = smallest hub index
        assignment[u] = kept[best]
        weight_mask[best, u] = 1.0

    new_fused = ad.take_rows(emb.fused, kept_arr)
    if dropped:
        # row u of attn holds the contract's attn[u, h] weights; transpose
        # so the mask can pick entry [h, u] without relying on bitwise
        # symmetry of the product matrix
        contrib = (ad.take_rows(ad.transpose(attn), kept_arr) * weight_mask) @ emb.fused
        new_fused = new_fused + contrib
    c = emb.c_hidden
    balanced = ad.take_cols(new_fused, np.arange(c))
    unbalanced = ad.take_cols(new_fused, np.arange(c, 2 * c))
    return NodeEmbedding(balanced, unbalanced, fuse(balanced, unbalanced)), assignment


def pool_graph(network, kept, assignment=None):
    """Cut the network down to the kept nodes (exact submatrix)."""
    n = network.n_nodes
    kept = list(kept)
    if any(not 0 <= i < n for i in kept):
        raise IndexOutOfRange(f"kept indices must lie in [0, {n})")
    if sorted(set(kept)) != kept:
        raise IndexOutOfRange("kept indices must be strictly increasing")
    idx = np.asarray(kept, dtype=np.intp)
    # a submatrix of a valid network keeps symmetry, range and zero diagonal
    sub = FunctionalNetwork(
        adjacency=network.adjacency[np.ix_(idx, idx)],
        features=network.features[idx],
        node_labels=[network.node_labels[i] for i in kept],
        validate=False,
    )
    return PooledGraph(sub, kept, dict(assignment) if assignment else {})
