"""Loading signal matrices, node moment features, and signed correlation networks.

A signal matrix holds one multivariate time series per node (rows are nodes,
columns are timepoints).  Networks are built by pairwise Pearson correlation,
giving a signed weighted adjacency with entries in [-1, 1].
"""

import csv
import math
import os
from dataclasses import InitVar, dataclass, field

import numpy as np

from .errors import (
    AsymmetricInput,
    MissingFile,
    NonFiniteValue,
    ParseError,
    ShapeMismatch,
    TooFewNodes,
    TooFewTimepoints,
)

MIN_TIMEPOINTS = 4  # kurtosis needs at least four samples


@dataclass
class BoldMatrix:
    """Per-node signal matrix of shape (n_nodes, n_timepoints)."""

    data: np.ndarray
    node_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ShapeMismatch("signal matrix must be 2-dimensional")
        n, d = self.data.shape
        if not self.node_labels:
            self.node_labels = [f"node{i:02d}" for i in range(n)]
        if len(self.node_labels) != n:
            raise ShapeMismatch("one label per node required")
        if n < 2:
            raise TooFewNodes("need at least two nodes")
        if d < MIN_TIMEPOINTS:
            raise TooFewTimepoints(f"need at least {MIN_TIMEPOINTS} timepoints, got {d}")
        if not np.all(np.isfinite(self.data)):
            i, j = np.argwhere(~np.isfinite(self.data))[0]
            raise NonFiniteValue(int(i), int(j))

    @property
    def n_nodes(self):
        return self.data.shape[0]

    @property
    def n_timepoints(self):
        return self.data.shape[1]


@dataclass
class FunctionalNetwork:
    """Signed correlation network: adjacency, node features, node labels.

    ``validate=False`` skips the invariant checks; it is meant for internal
    construction from inputs that already satisfy them (e.g. submatrices of
    a validated network).
    """

    adjacency: np.ndarray
    features: np.ndarray
    node_labels: list
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if not validate:
            return
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise ShapeMismatch("adjacency must be square")
        if self.features.shape[0] != n or len(self.node_labels) != n:
            raise ShapeMismatch("features and labels must cover every node")
        if not np.allclose(self.adjacency, self.adjacency.T, atol=1e-12, rtol=0.0):
            raise AsymmetricInput("adjacency must be symmetric")
        if np.any(np.abs(self.adjacency) > 1.0 + 1e-12):
            raise ShapeMismatch("correlation entries must lie in [-1, 1]")
        if np.any(np.diag(self.adjacency) != 0.0):
            raise ShapeMismatch("adjacency diagonal must be zero")

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]


def load_bold_csv(path):
    """Load a signal matrix from CSV.

    Expected layout: one header row, then one row per node whose first cell is
    the node label and whose remaining cells are numeric timepoints.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    labels = []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, cells in enumerate(reader, start=1):
            if lineno == 1:
                width = len(cells)
                continue
            if len(cells) != width:
                raise ParseError(lineno, len(cells), "ragged row")
            labels.append(cells[0])
            values = []
            for colno, cell in enumerate(cells[1:], start=2):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(lineno, colno, f"not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise NonFiniteValue(lineno, colno)
                values.append(v)
            rows.append(values)
    if not rows:
        raise ParseError(1, 1, "no data rows")
    return BoldMatrix(np.array(rows, dtype=np.float64), labels)


def save_bold_csv(bold, path):
    """Write a signal matrix in the layout load_bold_csv expects."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node"] + [f"t{j}" for j in range(bold.n_timepoints)])
        for label, row in zip(bold.node_labels, bold.data):
            writer.writerow([label] + [repr(float(v)) for v in row])


def node_features(bold):
    """Skewness and excess kurtosis per node, population moments.

    Returns an (n_nodes, 2) matrix: column 0 skewness, column 1 excess
    kurtosis.  Constant rows get 0 for both, by convention.
    """
    x = bold.data
    centered = x - x.mean(axis=1, keepdims=True)
    m2 = np.mean(centered**2, axis=1)
    m3 = np.mean(centered**3, axis=1)
    m4 = np.mean(centered**4, axis=1)
    out = np.zeros((x.shape[0], 2), dtype=np.float64)
    ok = m2 > 0.0
    out[ok, 0] = m3[ok] / m2[ok] ** 1.5
    out[ok, 1] = m4[ok] / m2[ok] ** 2 - 3.0
    return out


def pearson_adjacency(data):
    """Pairwise Pearson correlations with zero diagonal.

    Rows with zero variance correlate 0 with everything rather than NaN.
    """
    data = np.asarray(data, dtype=np.float64)
    centered = data - data.mean(axis=1, keepdims=True)
    std = np.sqrt(np.mean(centered**2, axis=1))
    safe = np.where(std > 0.0, std, 1.0)
    z = centered / safe[:, None]
    corr = (z @ z.T) / data.shape[1]
    corr[std == 0.0, :] = 0.0
    corr[:, std == 0.0] = 0.0
    np.fill_diagonal(corr, 0.0)
    # clip float round-off so entries stay inside [-1, 1]
    np.clip(corr, -1.0, 1.0, out=corr)
    # exact symmetry regardless of summation order
    corr = (corr + corr.T) / 2.0
    return corr


def pearson_network(bold):
    """Build the signed correlation network of a signal matrix."""
    return FunctionalNetwork(
        adjacency=pearson_adjacency(bold.data),
        features=node_features(bold),
        node_labels=list(bold.node_labels),
    )


def save_network_csv(network, path):
    """Export an adjacency matrix with node labels as header row/column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(network.node_labels))
        for label, row in zip(network.node_labels, network.adjacency):
            writer.writerow([label] + [f"{v:.15g}" for v in row])
