"""Balanced/unbalanced node embedding via signed graph attention.

Each node carries two feature streams.  The balanced stream collects messages
from positive neighbors' balanced streams and negative neighbors' unbalanced
streams; the unbalanced stream collects the opposite wiring.  This mirrors
the parity rule for signed paths: an even number of negative edges keeps a
relationship balanced, an odd number flips it.

Attention is single-head: endpoint streams are projected, scored with a
LeakyReLU of a learned vector applied to the concatenated endpoint features,
softmax-normalized over each node's same-sign neighborhood, and scaled by the
degree-normalized edge weight.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import NonFiniteParams, ShapeMismatch

LEAKY_SLOPE = 0.2


@dataclass
class BueParams:
    """Per-layer parameters, all autodiff tensors."""

    w_balanced_in: ad.Tensor
    w_unbalanced_in: ad.Tensor
    attn_vec_pos: ad.Tensor
    attn_vec_neg: ad.Tensor
    mix_pos_to_balanced: ad.Tensor
    mix_neg_to_balanced: ad.Tensor
    mix_pos_to_unbalanced: ad.Tensor
    mix_neg_to_unbalanced: ad.Tensor

    _ORDER = (
        "w_balanced_in",
        "w_unbalanced_in",
        "attn_vec_pos",
        "attn_vec_neg",
        "mix_pos_to_balanced",
        "mix_neg_to_balanced",
        "mix_pos_to_unbalanced",
        "mix_neg_to_unbalanced",
    )

    @classmethod
    def init(cls, c_in, c_hidden, rng):
        """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""

        def uniform(shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return ad.Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

        return cls(
            w_balanced_in=uniform((c_in, c_hidden), c_in),
            w_unbalanced_in=uniform((c_in, c_hidden), c_in),
            attn_vec_pos=uniform((2 * c_hidden,), 2 * c_hidden),
            attn_vec_neg=uniform((2 * c_hidden,), 2 * c_hidden),
            mix_pos_to_balanced=uniform((c_hidden, c_hidden), c_hidden),
            mix_neg_to_balanced=uniform((c_hidden, c_hidden), c_hidden),
            mix_pos_to_unbalanced=uniform((c_hidden, c_hidden), c_hidden),
            mix_neg_to_unbalanced=uniform((c_hidden, c_hidden), c_hidden),
        )

    @property
    def c_in(self):
        return self.w_balanced_in.shape[0]

    @property
    def c_hidden(self):
        return self.w_balanced_in.shape[1]

    def param_list(self):
        return [getattr(self, name) for name in self._ORDER]

    def check_finite(self):
        # a finite sum certifies every entry finite (any nan/inf poisons it)
        total = 0.0
        for name in self._ORDER:
            total += float(getattr(self, name).value.sum())
        if not np.isfinite(total):
            for name in self._ORDER:
                if not np.all(np.isfinite(getattr(self, name).value)):
                    raise NonFiniteParams(f"non-finite values in {name}")
            raise NonFiniteParams("non-finite parameter sum")


@dataclass
class NodeEmbedding:
    """Balanced and unbalanced streams plus their concatenation."""

    balanced: ad.Tensor
    unbalanced: ad.Tensor
    fused: ad.Tensor

    @property
    def n_nodes(self):
        return self.fused.shape[0]

    @property
    def c_hidden(self):
        return self.balanced.shape[1]


def fuse(balanced, unbalanced):
    """Concatenate the two streams along channels, balanced first."""
    if balanced.shape[0] != unbalanced.shape[0]:
        raise ShapeMismatch("streams must cover the same nodes")
    return ad.concat([balanced, unbalanced], axis=1)


def _edge_attention(stream, attn_vec, support, c_hidden):
    # score(i, j) = LeakyReLU(a[:c] . s_i + a[c:] . s_j) on the sign support,
    # then a masked softmax over each row and a rescale by the edge weight
    left = stream @ ad.reshape(ad.take_rows(attn_vec, np.arange(c_hidden)), (c_hidden, 1))
    right = stream @ ad.reshape(
        ad.take_rows(attn_vec, np.arange(c_hidden, 2 * c_hidden)), (c_hidden, 1)
    )
    scores = ad.leaky_relu(left + right.T, LEAKY_SLOPE)
    mask = (support > 0.0).astype(np.float64)
    return ad.masked_softmax(scores, mask) * ad.Tensor(support)


def bue_forward(params, norm, balanced_in, unbalanced_in):
    """One layer of signed attention message passing.

    ``balanced_in`` and ``unbalanced_in`` are the previous layer's streams;
    at the first layer both are the raw node feature matrix.  Returns a
    NodeEmbedding with tanh-bounded streams.
    """
    params.check_finite()
    balanced_in = balanced_in if isinstance(balanced_in, ad.Tensor) else ad.Tensor(balanced_in)
    unbalanced_in = (
        unbalanced_in if isinstance(unbalanced_in, ad.Tensor) else ad.Tensor(unbalanced_in)
    )
    n = norm.pos_norm.shape[0]
    if balanced_in.shape != unbalanced_in.shape:
        raise ShapeMismatch("stream shapes must match")
    if balanced_in.shape[0] != n:
        raise ShapeMismatch(f"expected {n} node rows, got {balanced_in.shape[0]}")
    if balanced_in.shape[1] != params.c_in:
        raise ShapeMismatch(
            f"expected {params.c_in} input channels, got {balanced_in.shape[1]}"
        )

    c = params.c_hidden
    z_b = balanced_in @ params.w_balanced_in
    z_u = unbalanced_in @ params.w_unbalanced_in
    b0 = ad.tanh(z_b)
    u0 = ad.tanh(z_u)

    coef_pos = _edge_attention(b0, params.attn_vec_pos, norm.pos_norm, c)
    coef_neg = _edge_attention(u0, params.attn_vec_neg, norm.neg_norm, c)

    balanced = ad.tanh(
        z_b
        + (coef_pos @ b0) @ params.mix_pos_to_balanced
        + (coef_neg @ u0) @ params.mix_neg_to_balanced
    )
    unbalanced = ad.tanh(
        z_u
        + (coef_pos @ u0) @ params.mix_pos_to_unbalanced
        + (coef_neg @ b0) @ params.mix_neg_to_unbalanced
    )
    return NodeEmbedding(balanced, unbalanced, fuse(balanced, unbalanced))
