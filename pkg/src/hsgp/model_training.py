"""End-to-end model: stacked embedding/pooling, losses, optimizer, training.

The forward pass alternates signed attention embedding and hierarchical
pooling, sums the surviving fused node embeddings into a graph vector, and
feeds the concatenated (head-view, tail-view) vectors through a small MLP.
Training optimizes a weighted sum of the supervised loss and a temperature-
scaled contrastive loss over in-batch negatives.

Everything runs sequentially in double precision, so a (seed, data, config)
triple fully determines the training history, bit for bit.
"""

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .bue_layer import BueParams, bue_forward
from .errors import (
    BatchTooSmall,
    EmptyDataset,
    EpochOutOfRange,
    InvalidSpec,
    LabelOutOfRange,
    MissingFile,
    NonFiniteGradient,
    ShapeMismatch,
    ZeroNormEmbedding,
)
from .hgp_layer import (
    aggregate_features,
    feature_attention,
    information_scores,
    pool_graph,
    select_topk,
)
from .signed_graph import laplace_normalize, split_signs

HEAD_HIDDEN = 64
BETA1, BETA2, EPS = 0.9, 0.999, 1e-8
CHECKPOINT_VERSION = 1


@dataclass
class Sample:
    """One labeled contrastive pair."""

    pair: object
    target: object


@dataclass
class TrainingConfig:
    batch_size: int = 128
    temperature: float = 0.2
    mu1: float = 1.0
    mu2: float = 0.1
    base_lr: float = 1e-4
    weight_decay: float = 1e-5
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0
    symmetrized_contrastive: bool = False

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise InvalidSpec("temperature must be positive")
        if self.mu1 < 0.0 or self.mu2 < 0.0:
            raise InvalidSpec("loss weights must be nonnegative")
        if self.batch_size < 1:
            raise InvalidSpec("batch_size must be positive")

    @classmethod
    def defaults_for(cls, task, **overrides):
        """Task-specific loss-weight defaults: (1, 0.1) for classification,
        (0.5, 1) for regression."""
        weights = {"classification": (1.0, 0.1), "regression": (0.5, 1.0)}[task]
        overrides.setdefault("mu1", weights[0])
        overrides.setdefault("mu2", weights[1])
        return cls(**overrides)


@dataclass
class ModelParams:
    """All trainable tensors plus the task description."""

    bue_layers: list
    head_w1: ad.Tensor
    head_b1: ad.Tensor
    head_w2: ad.Tensor
    head_b2: ad.Tensor
    task: str = "classification"
    num_classes: int = 2

    @classmethod
    def init(cls, c_in, c_hidden, n_layers, task="classification", num_classes=2, seed=0):
        if task not in ("classification", "regression"):
            raise InvalidSpec(f"unknown task {task!r}")
        rng = np.random.default_rng(seed)
        layers = [
            BueParams.init(c_in if i == 0 else c_hidden, c_hidden, rng)
            for i in range(n_layers)
        ]
        head_in = 2 * (2 * c_hidden)
        out_dim = num_classes if task == "classification" else 1

        def uniform(shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return ad.Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

        return cls(
            bue_layers=layers,
            head_w1=uniform((head_in, HEAD_HIDDEN), head_in),
            head_b1=uniform((HEAD_HIDDEN,), head_in),
            head_w2=uniform((HEAD_HIDDEN, out_dim), HEAD_HIDDEN),
            head_b2=uniform((out_dim,), HEAD_HIDDEN),
            task=task,
            num_classes=num_classes,
        )

    @property
    def c_in(self):
        return self.bue_layers[0].c_in

    @property
    def c_hidden(self):
        return self.bue_layers[0].c_hidden

    @property
    def n_layers(self):
        return len(self.bue_layers)

    @property
    def output_dim(self):
        return self.head_w2.shape[1]

    def param_names(self):
        names = []
        for i, layer in enumerate(self.bue_layers):
            names.extend(f"layer{i}.{f}" for f in layer._ORDER)
        names.extend(["head.w1", "head.b1", "head.w2", "head.b2"])
        return names

    def param_list(self):
        tensors = []
        for layer in self.bue_layers:
            tensors.extend(layer.param_list())
        tensors.extend([self.head_w1, self.head_b1, self.head_w2, self.head_b2])
        return tensors

    def snapshot(self):
        return [t.value.copy() for t in self.param_list()]

    def restore(self, values):
        for t, v in zip(self.param_list(), values):
            t.value[...] = v


@dataclass
class LayerTrace:
    kept_indices: list
    assignment: dict
    n_in: int


@dataclass
class EmbedTrace:
    layers: list
    final_fused: ad.Tensor
    final_labels: list


def embed_with_trace(params, network, pool_cfg):
    """Graph embedding plus the per-layer pooling decisions behind it."""
    if pool_cfg.layers != params.n_layers:
        raise ShapeMismatch(
            f"model has {params.n_layers} layers, config asks for {pool_cfg.layers}"
        )
    g = network
    streams = (ad.Tensor(network.features), ad.Tensor(network.features))
    traces = []
    emb = None
    for layer_params in params.bue_layers:
        n = g.n_nodes
        norm = laplace_normalize(split_signs(g.adjacency, validate=False))
        emb = bue_forward(layer_params, norm, streams[0], streams[1])
        kept = select_topk(information_scores(norm, emb), pool_cfg.k_at(n))
        emb, assignment = aggregate_features(emb, kept, feature_attention(emb))
        pooled = pool_graph(g, kept, assignment)
        traces.append(LayerTrace(kept, assignment, n))
        g = pooled.network
        streams = (emb.balanced, emb.unbalanced)
    embedding = ad.tsum(emb.fused, axis=0)
    return embedding, EmbedTrace(traces, emb.fused, list(g.node_labels))


def forward_embed(params, network, pool_cfg):
    """Sum of the final pooled layer's fused node embeddings."""
    embedding, _ = embed_with_trace(params, network, pool_cfg)
    return embedding


def _stack(embeddings):
    rows = [ad.reshape(e, (1, e.shape[0])) for e in embeddings]
    return ad.concat(rows, axis=0)


def ntxent_batch(hats, checks, temperature, symmetrized=False):
    """Temperature-scaled contrastive loss over in-batch negatives.

    Anchored on the head-view embeddings: each positive pair is scored
    against the anchor's similarities to every OTHER sample's tail view (the
    positive pair itself is excluded from the denominator, so the loss is
    not bounded below by zero).  The symmetrized variant averages in the
    mirror-anchored term.
    """
    m = len(hats)
    if m < 2:
        raise BatchTooSmall("contrastive loss needs at least two pairs")
    if len(checks) != m:
        raise ShapeMismatch("need one check embedding per hat embedding")
    hat_mat = _stack(hats)
    check_mat = _stack(checks)
    loss = _ntxent_directed(hat_mat, check_mat, temperature)
    if symmetrized:
        loss = (loss + _ntxent_directed(check_mat, hat_mat, temperature)) * 0.5
    return loss


def _ntxent_directed(anchors, others, temperature):
    m = anchors.shape[0]
    a_norm = ad.sqrt(ad.tsum(anchors * anchors, axis=1, keepdims=True))
    o_norm = ad.sqrt(ad.tsum(others * others, axis=1, keepdims=True))
    if np.any(a_norm.value == 0.0) or np.any(o_norm.value == 0.0):
        raise ZeroNormEmbedding("cosine similarity undefined for zero vectors")
    an = anchors / a_norm
    on = others / o_norm
    sims = (an @ on.T) * (1.0 / temperature)
    positive = ad.tsum(an * on, axis=1) * (1.0 / temperature)
    mask = 1.0 - np.eye(m)
    # detached row max over the off-diagonal keeps exp() in range without
    # changing the value or gradient of the log-sum
    shift = np.max(np.where(mask > 0.0, sims.value, -np.inf), axis=1)
    spread = ad.exp(sims - ad.Tensor(shift[:, None])) * ad.Tensor(mask)
    log_denom = ad.log(ad.tsum(spread, axis=1)) + ad.Tensor(shift)
    return ad.mean(log_denom - positive)


def predict(params, hat_embedding, check_embedding):
    """MLP head output: log class probabilities, or a length-1 regression."""
    z = ad.concat([hat_embedding, check_embedding], axis=0)
    if z.shape[0] != params.head_w1.shape[0]:
        raise ShapeMismatch(
            f"head expects {params.head_w1.shape[0]} inputs, got {z.shape[0]}"
        )
    hidden = ad.tanh(z @ params.head_w1 + params.head_b1)
    out = hidden @ params.head_w2 + params.head_b2
    if params.task == "classification":
        return ad.log_softmax(out)
    return out


def supervised_loss(pred, target, task):
    """Negative log-likelihood of the label, or absolute error."""
    if task == "classification":
        label = int(target)
        if not 0 <= label < pred.shape[0]:
            raise LabelOutOfRange(f"label {label} outside [0, {pred.shape[0]})")
        return -ad.tsum(ad.take_rows(pred, np.array([label])))
    return ad.tsum(ad.absolute(pred - float(target)))


def total_loss(sup, contra, mu1, mu2):
    return mu1 * sup + mu2 * contra


def batch_objective(params, batch, train_cfg, pool_cfg):
    """Weighted supervised + contrastive objective of one batch.

    Returns the loss tensor and a float breakdown for logging.
    """
    if not batch:
        raise EmptyDataset("empty batch")
    hats, checks, sup_terms = [], [], []
    for sample in batch:
        hat_emb = forward_embed(params, sample.pair.hat_network, pool_cfg)
        check_emb = forward_embed(params, sample.pair.check_network, pool_cfg)
        pred = predict(params, hat_emb, check_emb)
        sup_terms.append(supervised_loss(pred, sample.target, params.task))
        hats.append(hat_emb)
        checks.append(check_emb)
    sup = sup_terms[0]
    for term in sup_terms[1:]:
        sup = sup + term
    sup = sup * (1.0 / len(batch))
    if train_cfg.mu2 != 0.0:
        contra = ntxent_batch(
            hats, checks, train_cfg.temperature, train_cfg.symmetrized_contrastive
        )
    else:
        contra = ad.Tensor(0.0)
    loss = total_loss(sup, contra, train_cfg.mu1, train_cfg.mu2)
    info = {
        "total": float(loss.value),
        "supervised": float(sup.value),
        "contrastive": float(contra.value),
    }
    return loss, info


def gradients(params, batch, train_cfg, pool_cfg):
    """Analytic gradient of the batch objective for every parameter."""
    tensors = params.param_list()
    for t in tensors:
        t.zero_grad()
    loss, info = batch_objective(params, batch, train_cfg, pool_cfg)
    loss.backward()
    grads = []
    for t in tensors:
        g = t.grad if t.grad is not None else np.zeros_like(t.value)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("gradient contains non-finite values")
        grads.append(g)
    return grads, info


@dataclass
class AdamState:
    step: int
    m: list
    v: list

    @classmethod
    def init(cls, params):
        tensors = params.param_list()
        return cls(
            step=0,
            m=[np.zeros_like(t.value) for t in tensors],
            v=[np.zeros_like(t.value) for t in tensors],
        )


def adam_step(state, params, grads, lr, weight_decay):
    """One Adam update with L2 decay folded into the gradients."""
    state.step += 1
    t = state.step
    for theta, g, m, v in zip(params.param_list(), grads, state.m, state.v):
        g = g + weight_decay * theta.value
        m[...] = BETA1 * m + (1.0 - BETA1) * g
        v[...] = BETA2 * v + (1.0 - BETA2) * g * g
        m_hat = m / (1.0 - BETA1**t)
        v_hat = v / (1.0 - BETA2**t)
        theta.value[...] = theta.value - lr * m_hat / (np.sqrt(v_hat) + EPS)


def lr_at_epoch(base_lr, epoch, max_epochs):
    """Polynomial decay: base_lr * (1 - epoch/max_epochs)^0.9."""
    if not 0 <= epoch <= max_epochs:
        raise EpochOutOfRange(f"epoch {epoch} outside [0, {max_epochs}]")
    return base_lr * (1.0 - epoch / max_epochs) ** 0.9


def validation_loss(params, val_set, train_cfg, pool_cfg):
    """Objective over the whole validation set as a single batch.

    Falls back to the supervised term alone when the set has a single
    sample (the contrastive term needs two).
    """
    if not val_set:
        raise EmptyDataset("empty validation set")
    cfg = train_cfg
    if len(val_set) < 2 and cfg.mu2 != 0.0:
        cfg = replace(cfg, mu2=0.0)
    with ad.no_grad():
        _, info = batch_objective(params, val_set, cfg, pool_cfg)
    return info["total"]


def train(train_set, val_set, params, train_cfg, pool_cfg, target_train_accuracy=None):
    """Mini-batch training with early stopping on validation loss.

    Batches are drawn by seeded shuffling; a trailing batch smaller than
    batch_size is dropped so the contrastive term always sees a full batch.
    Returns the parameters rolled back to the best validation epoch and the
    per-epoch history.  When target_train_accuracy is set, training also
    stops once the training-set accuracy reaches it (classification only).
    """
    if not train_set:
        raise EmptyDataset("empty training set")
    if not val_set:
        raise EmptyDataset("empty validation set")
    m = min(train_cfg.batch_size, len(train_set))
    if m < 2 and train_cfg.mu2 != 0.0:
        raise BatchTooSmall("contrastive training needs batches of at least two")
    rng = np.random.default_rng(train_cfg.seed)
    state = AdamState.init(params)
    best_val = math.inf
    best_values = params.snapshot()
    bad = 0
    history = []
    for epoch in range(train_cfg.max_epochs):
        lr = lr_at_epoch(train_cfg.base_lr, epoch, train_cfg.max_epochs)
        order = rng.permutation(len(train_set))
        batch_losses = []
        for start in range(0, len(order) - m + 1, m):
            batch = [train_set[i] for i in order[start : start + m]]
            grads, info = gradients(params, batch, train_cfg, pool_cfg)
            adam_step(state, params, grads, lr, train_cfg.weight_decay)
            batch_losses.append(info["total"])
        train_loss = float(np.mean(batch_losses))
        val_loss = validation_loss(params, val_set, train_cfg, pool_cfg)
        history.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr}
        )
        if val_loss < best_val:
            best_val = val_loss
            best_values = params.snapshot()
            bad = 0
        else:
            bad += 1
            if bad >= train_cfg.patience:
                break
        if target_train_accuracy is not None and params.task == "classification":
            acc = evaluate(params, train_set, pool_cfg)["accuracy"]
            if acc >= target_train_accuracy:
                best_values = params.snapshot()
                break
    params.restore(best_values)
    return params, history


def predict_dataset(params, dataset, pool_cfg):
    """Hard label (or scalar) predictions for every sample."""
    outputs = []
    with ad.no_grad():
        for sample in dataset:
            hat_emb = forward_embed(params, sample.pair.hat_network, pool_cfg)
            check_emb = forward_embed(params, sample.pair.check_network, pool_cfg)
            pred = predict(params, hat_emb, check_emb)
            if params.task == "classification":
                outputs.append(int(np.argmax(pred.value)))
            else:
                outputs.append(float(pred.value[0]))
    return outputs


def _binary_stats(preds, truths, positive):
    tp = sum(1 for p, t in zip(preds, truths) if p == positive and t == positive)
    fp = sum(1 for p, t in zip(preds, truths) if p == positive and t != positive)
    fn = sum(1 for p, t in zip(preds, truths) if p != positive and t == positive)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_metrics(preds, truths, num_classes):
    """Accuracy, precision, recall, F1.  Binary treats class 1 as positive;
    multiclass macro-averages the per-class one-vs-rest statistics."""
    if not truths:
        raise EmptyDataset("nothing to score")
    truths = [int(t) for t in truths]
    accuracy = sum(1 for p, t in zip(preds, truths) if p == t) / len(truths)
    if num_classes == 2:
        precision, recall, f1 = _binary_stats(preds, truths, positive=1)
    else:
        stats = [_binary_stats(preds, truths, c) for c in range(num_classes)]
        precision = float(np.mean([s[0] for s in stats]))
        recall = float(np.mean([s[1] for s in stats]))
        f1 = float(np.mean([s[2] for s in stats]))
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


def evaluate(params, dataset, pool_cfg):
    """Task metrics of the model's hard predictions on a labeled dataset."""
    if not dataset:
        raise EmptyDataset("nothing to evaluate")
    preds = predict_dataset(params, dataset, pool_cfg)
    truths = [s.target for s in dataset]
    if params.task == "regression":
        mae = float(np.mean([abs(p - t) for p, t in zip(preds, truths)]))
        return {"mae": mae}
    return classification_metrics(preds, truths, params.num_classes)


def kfold_indices(n, k, seed):
    """Disjoint, exhaustive K folds of range(n) by seeded permutation."""
    if not 2 <= k <= n:
        raise InvalidSpec(f"need 2 <= folds <= {n}, got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def fold_split(n, k, fold, seed):
    """(train, val, test) index arrays: fold f tests, fold f+1 validates."""
    if not 0 <= fold < k:
        raise InvalidSpec(f"fold {fold} outside [0, {k})")
    folds = kfold_indices(n, k, seed)
    test = folds[fold]
    val = folds[(fold + 1) % k]
    train_idx = np.sort(
        np.concatenate([f for i, f in enumerate(folds) if i not in (fold, (fold + 1) % k)])
    )
    return train_idx, val, test


def save_checkpoint(params, path, seed=None):
    """Write parameters and shape metadata as JSON (exact float round-trip)."""
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "task": params.task,
        "num_classes": params.num_classes,
        "dims": {
            "c_in": params.c_in,
            "c_hidden": params.c_hidden,
            "n_layers": params.n_layers,
            "head_hidden": HEAD_HIDDEN,
            "output_dim": params.output_dim,
        },
        "seed": seed,
        "param_order": params.param_names(),
        "params": {
            name: tensor.value.tolist()
            for name, tensor in zip(params.param_names(), params.param_list())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)


def load_checkpoint(path):
    """Rebuild ModelParams from a checkpoint manifest."""
    if not Path(path).exists():
        raise MissingFile(f"missing checkpoint {path}")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise InvalidSpec(f"unsupported checkpoint version {manifest.get('format_version')}")
    dims = manifest["dims"]
    params = ModelParams.init(
        c_in=dims["c_in"],
        c_hidden=dims["c_hidden"],
        n_layers=dims["n_layers"],
        task=manifest["task"],
        num_classes=manifest["num_classes"],
        seed=0,
    )
    stored = manifest["params"]
    for name, tensor in zip(params.param_names(), params.param_list()):
        value = np.asarray(stored[name], dtype=np.float64)
        if value.shape != tensor.value.shape:
            raise InvalidSpec(f"checkpoint shape mismatch for {name}")
        tensor.value[...] = value
    return params
