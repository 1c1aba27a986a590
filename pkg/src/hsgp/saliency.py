"""Node saliency maps built by linearizing the prediction head.

The head applies two affine layers with a tanh between them.  Around a given
sample we take the Jacobian of everything past the first layer at that
sample's hidden activation and compose it with the first layer's weights.
That yields one effective weight per embedding channel; scoring the final
pooled nodes against those weights and walking the pooling decisions
backwards gives a per-node saliency over the original graph.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import InconsistentChain, InvalidTarget, KOutOfRange
from .model_training import embed_with_trace


@dataclass
class SaliencyMap:
    scores: np.ndarray
    normalized: np.ndarray
    target: object
    node_labels: list

    @property
    def n_nodes(self):
        return len(self.scores)


def _resolve_target(params, target):
    """Output column for the requested target; canonical display value."""
    if params.task == "regression":
        if target not in (None, "regression", 0):
            raise InvalidTarget("regression models have a single output")
        return 0, "regression"
    if not isinstance(target, (int, np.integer)) or isinstance(target, bool):
        raise InvalidTarget("classification target must be a class index")
    if not 0 <= target < params.num_classes:
        raise InvalidTarget(f"target {target} outside [0, {params.num_classes})")
    return int(target), int(target)


def cam_final_scores(params, sample, target, pool_cfg, use_check_branch=False):
    """Per-node scores at the final pooled layer for one prediction target.

    Returns (scores, trace); the trace carries the pooling decisions needed
    to map the scores back onto original nodes.
    """
    column, _ = _resolve_target(params, target)
    with ad.no_grad():
        hat_emb, hat_trace = embed_with_trace(params, sample.hat_network, pool_cfg)
        check_emb, check_trace = embed_with_trace(params, sample.check_network, pool_cfg)
        z = np.concatenate([hat_emb.value, check_emb.value])
        hidden = np.tanh(z @ params.head_w1.value + params.head_b1.value)
    # d out[column] / d z = W1 @ diag(1 - hidden^2) @ W2[:, column]
    downstream = (1.0 - hidden**2) * params.head_w2.value[:, column]
    effective = params.head_w1.value @ downstream
    width = effective.shape[0] // 2
    if use_check_branch:
        branch_weights = effective[width:]
        trace = check_trace
    else:
        branch_weights = effective[:width]
        trace = hat_trace
    scores = trace.final_fused.value @ branch_weights
    return scores, trace


def _layer_ranks(layer):
    """Kept node -> row position, after validating the layer's bookkeeping."""
    kept = {int(i) for i in layer.kept_indices}
    dropped = {int(i) for i in layer.assignment}
    if kept & dropped or len(kept) + len(dropped) != layer.n_in:
        raise InconsistentChain(
            f"{len(kept)} kept + {len(dropped)} dropped != {layer.n_in} nodes"
        )
    return {int(node): r for r, node in enumerate(layer.kept_indices)}


def _compose_chain(layers, n_original):
    """Final-layer row index for every original node."""
    position = {i: i for i in range(n_original)}
    for layer in layers:
        rank = _layer_ranks(layer)
        moved = {}
        for orig, cur in position.items():
            if cur in rank:
                moved[orig] = rank[cur]
                continue
            hub = layer.assignment.get(cur)
            if hub is None or int(hub) not in rank:
                raise InconsistentChain(f"node {cur} has no surviving hub")
            moved[orig] = rank[int(hub)]
        position = moved
    return position


def normalize_scores(scores):
    """Min-max scale to [0, 1]; all-equal maps collapse to zeros."""
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = float(np.min(scores)), float(np.max(scores))
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def unpool_saliency(final_scores, chain, node_labels, target=None):
    """Propagate final-layer scores back to every original node.

    chain is the per-layer pooling record from embed_with_trace (either the
    trace itself or its list of layers).
    """
    layers = chain.layers if hasattr(chain, "layers") else list(chain)
    if not layers:
        raise InconsistentChain("empty pooling chain")
    n_original = layers[0].n_in
    if len(node_labels) != n_original:
        raise InconsistentChain(
            f"{len(node_labels)} labels for {n_original} original nodes"
        )
    final_scores = np.asarray(final_scores, dtype=np.float64)
    position = _compose_chain(layers, n_original)
    scores = np.empty(n_original, dtype=np.float64)
    for orig in range(n_original):
        idx = position[orig]
        if not 0 <= idx < final_scores.shape[0]:
            raise InconsistentChain(f"final row {idx} outside the score vector")
        scores[orig] = final_scores[idx]
    return SaliencyMap(scores, normalize_scores(scores), target, list(node_labels))


def saliency_map(params, sample, target, pool_cfg, use_check_branch=False):
    """End-to-end per-node saliency for one sample."""
    _, display = _resolve_target(params, target)
    scores, trace = cam_final_scores(params, sample, target, pool_cfg, use_check_branch)
    labels = (sample.check_network if use_check_branch else sample.hat_network).node_labels
    return unpool_saliency(scores, trace, labels, target=display)


def class_average_map(params, samples, target, pool_cfg, use_check_branch=False):
    """Average the per-sample normalized maps, as class-level summaries do."""
    maps = [saliency_map(params, s, target, pool_cfg, use_check_branch) for s in samples]
    if not maps:
        raise InconsistentChain("no samples to average")
    mean_norm = np.mean([m.normalized for m in maps], axis=0)
    return SaliencyMap(mean_norm.copy(), normalize_scores(mean_norm),
                       maps[0].target, maps[0].node_labels)


def top_regions(saliency, k):
    """The k highest-scoring (label, normalized score) pairs, descending."""
    n = saliency.n_nodes
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    order = np.argsort(-saliency.normalized, kind="stable")
    return [(saliency.node_labels[int(i)], float(saliency.normalized[int(i)]))
            for i in order[:k]]
