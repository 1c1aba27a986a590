"""Sign splitting and symmetric degree normalization of signed adjacencies."""

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricInput, ShapeMismatch


@dataclass
class SignSplit:
    """Nonnegative positive part and magnitude of the negative part."""

    positive: np.ndarray
    negative_abs: np.ndarray


@dataclass
class NormalizedAdjacency:
    pos_norm: np.ndarray
    neg_norm: np.ndarray

    @property
    def n_nodes(self):
        return self.pos_norm.shape[0]


def split_signs(adjacency, validate=True):
    """Split a signed adjacency A into (max(A,0), max(-A,0)).

    ``validate=False`` skips the precondition checks for callers that
    already hold a validated matrix.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if validate:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeMismatch("adjacency must be square")
        if not np.allclose(a, a.T, atol=1e-12, rtol=0.0):
            raise AsymmetricInput("adjacency must be symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ShapeMismatch("adjacency diagonal must be zero")
    return SignSplit(np.maximum(a, 0.0), np.maximum(-a, 0.0))


def _sym_normalize(part):
    # D^{-1/2} A D^{-1/2} with weighted degrees; zero-degree rows stay zero
    deg = part.sum(axis=1)
    inv_sqrt = np.where(deg > 0.0, 1.0 / np.sqrt(np.where(deg > 0.0, deg, 1.0)), 0.0)
    return inv_sqrt[:, None] * part * inv_sqrt[None, :]


def laplace_normalize(split):
    """Symmetrically normalize both sign parts by their weighted degrees."""
    return NormalizedAdjacency(
        pos_norm=_sym_normalize(split.positive),
        neg_norm=_sym_normalize(split.negative_abs),
    )
