"""Contrastive pair generation by head/tail signal clamping.

For a window of size d, the head view drops the first d timepoints and the
tail view drops the last d, so both views keep length D - d.  Each view gets
its own correlation network while node features are computed once from the
full signal and shared, keeping the two views' feature matrices identical.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyDataset,
    InvalidSpec,
    ShapeMismatch,
    WindowLeavesTooFew,
    WindowTooLarge,
    ZeroMatrix,
)
from .signal_io import (
    MIN_TIMEPOINTS,
    BoldMatrix,
    FunctionalNetwork,
    node_features,
    pearson_adjacency,
)

DEFAULT_WINDOW = 10


@dataclass
class AugmentConfig:
    window_size: int = DEFAULT_WINDOW

    def __post_init__(self):
        if int(self.window_size) != self.window_size or self.window_size < 0:
            raise InvalidSpec("window_size must be a non-negative integer")
        self.window_size = int(self.window_size)


@dataclass
class ContrastivePair:
    hat_network: FunctionalNetwork
    check_network: FunctionalNetwork
    subject_id: str = ""


def augment_pair(bold, cfg, subject_id=""):
    """Build the (head-clamped, tail-clamped) network pair for one subject."""
    d = cfg.window_size
    n_time = bold.n_timepoints
    if d >= n_time:
        raise WindowTooLarge(f"window {d} >= signal length {n_time}")
    if n_time - d < MIN_TIMEPOINTS:
        raise WindowLeavesTooFew(f"window {d} leaves {n_time - d} < {MIN_TIMEPOINTS} timepoints")
    features = node_features(bold)
    labels = list(bold.node_labels)
    hat = FunctionalNetwork(pearson_adjacency(bold.data[:, d:]), features, labels)
    check = FunctionalNetwork(pearson_adjacency(bold.data[:, : n_time - d]), features, labels)
    return ContrastivePair(hat, check, subject_id)


def adjacency_cosine(a1, a2):
    """Cosine similarity of two adjacency matrices flattened over all entries."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ShapeMismatch(f"{a1.shape} vs {a2.shape}")
    n1 = np.linalg.norm(a1.ravel())
    n2 = np.linalg.norm(a2.ravel())
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroMatrix("cosine undefined for an all-zero matrix")
    return float(np.dot(a1.ravel(), a2.ravel()) / (n1 * n2))


def adjacency_l1_distance(a1, a2):
    """Mean absolute entrywise difference."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ShapeMismatch(f"{a1.shape} vs {a2.shape}")
    return float(np.mean(np.abs(a1 - a2)))


def adjacency_l2_distance(a1, a2):
    """Root mean square entrywise difference (entry-averaged, like the L1)."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ShapeMismatch(f"{a1.shape} vs {a2.shape}")
    return float(np.sqrt(np.mean((a1 - a2) ** 2)))


_METRICS = {
    "cosine": adjacency_cosine,
    "l1": adjacency_l1_distance,
    "l2": adjacency_l2_distance,
}


def pair_similarity_stats(pairs, metric="cosine"):
    """Inner- and inter-pair similarity of a pair collection.

    inner averages the metric over each pair's own two views; inter averages
    it over all M^2 (hat_m, check_t) combinations, the m == t terms included.
    """
    if metric not in _METRICS:
        raise InvalidSpec(f"unknown metric {metric!r}, pick one of {sorted(_METRICS)}")
    if not pairs:
        raise EmptyDataset("need at least one pair")
    psi = _METRICS[metric]
    hats = [p.hat_network.adjacency for p in pairs]
    checks = [p.check_network.adjacency for p in pairs]
    m = len(pairs)
    inner = sum(psi(hats[i], checks[i]) for i in range(m)) / m
    inter = sum(psi(hats[i], checks[j]) for i in range(m) for j in range(m)) / (m * m)
    return inner, inter
