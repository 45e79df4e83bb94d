"""Graph convolutional network with an MLP head, trained full-batch by
softmax cross-entropy; gradients are hand-derived reverse mode over numpy.

Layer update: h' = relu(W @ mean(neighbor embeddings) + B @ h), with a zero
neighbor term for isolated nodes. The head is relu-affine then affine. A
plain feed-forward MLP sharing the same training loop serves as the
graph-free baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .graphs import GraphData, mean_neighbor_operator

CHECKPOINT_FORMAT = "forestgraph-gcn"
CHECKPOINT_VERSION = 1

MLP_DIMS_SMALL = (64, 128)
MLP_DIMS_LARGE = (128, 256)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    n_layers: int = 2
    hidden_dims: tuple[int, ...] = (64, 64)
    head_hidden: int = 64
    weight_init_scale: float = 1.0
    seed: int = 0
    optimizer: str = "adam"  # "adam" or "sgd"
    dropout: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        dims = self.hidden_dims
        if isinstance(dims, int):
            dims = (dims,) * self.n_layers
        object.__setattr__(self, "hidden_dims", tuple(int(v) for v in dims))
        if len(self.hidden_dims) != self.n_layers:
            raise ValueError("hidden_dims must list one width per layer")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


def _uniform_init(rng, out_dim, in_dim, scale):
    bound = scale / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


class GCNModel:
    """Stacked graph-convolution layers plus a two-layer head."""

    def __init__(self, layers, w_in, b_a, w_out, b_o):
        self.layers = layers  # list of (W, B), each (out_dim, in_dim)
        self.w_in = w_in
        self.b_a = b_a
        self.w_out = w_out
        self.b_o = b_o
        self.loss_trace: np.ndarray | None = None
        dims = [layers[0][0].shape[1]] if layers else [w_in.shape[1]]
        for W, B in layers:
            if W.shape != B.shape or W.shape[1] != dims[-1]:
                raise ValueError("layer dimensions do not chain")
            dims.append(W.shape[0])
        if w_in.shape[1] != dims[-1] or w_out.shape[1] != w_in.shape[0]:
            raise ValueError("head dimensions do not chain")
        self.dims = tuple(dims)

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[0]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for W, B in self.layers:
            params.extend([W, B])
        params.extend([self.w_in, self.b_a, self.w_out, self.b_o])
        return params


def _uniform_bias(rng, dim, fan_in, scale):
    bound = scale / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=dim)


def init_gcn(input_dim: int, n_classes: int, config: TrainConfig) -> GCNModel:
    """Seeded initialization: every parameter uniform within +-scale/sqrt(fan_in).

    Biases share their layer's fan-in bound; a zero bias would leave dead
    nodes' head pre-activations sitting exactly on the relu kink.
    """
    rng = np.random.default_rng(config.seed)
    scale = config.weight_init_scale
    layers = []
    prev = input_dim
    for width in config.hidden_dims:
        W = _uniform_init(rng, width, prev, scale)
        B = _uniform_init(rng, width, prev, scale)
        layers.append((W, B))
        prev = width
    w_in = _uniform_init(rng, config.head_hidden, prev, scale)
    b_a = _uniform_bias(rng, config.head_hidden, prev, scale)
    w_out = _uniform_init(rng, n_classes, config.head_hidden, scale)
    b_o = _uniform_bias(rng, n_classes, config.head_hidden, scale)
    return GCNModel(layers, w_in, b_a, w_out, b_o)


def _gcn_layers_forward(model, X, M, drop_masks=None):
    """Run the graph-convolution stack, returning per-layer caches."""
    H = X
    caches = []
    for li, (W, B) in enumerate(model.layers):
        agg = M @ H
        Z = agg @ W.T + H @ B.T
        out = np.maximum(Z, 0.0)
        if drop_masks is not None:
            out = out * drop_masks[li]
        caches.append((H, agg, Z))
        H = out
    return H, caches


def gcn_forward(graph: GraphData, model: GCNModel,
                M: sparse.csr_matrix | None = None) -> np.ndarray:
    """Node embeddings after the full graph-convolution stack."""
    if graph.features.shape[1] != model.dims[0]:
        raise ValueError("feature dimension does not match the model")
    if M is None:
        M = mean_neighbor_operator(graph.adjacency)
    H, _ = _gcn_layers_forward(model, graph.features, M)
    return H


def head_forward(H: np.ndarray, model: GCNModel) -> np.ndarray:
    """Per-node logits from final embeddings."""
    hidden = np.maximum(H @ model.w_in.T + model.b_a, 0.0)
    return hidden @ model.w_out.T + model.b_o


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits, labels, mask):
    """Mean negative log-likelihood over masked rows, plus d(loss)/d(logits)."""
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValueError("training mask is empty")
    sub = logits[rows]
    shifted = sub - sub.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    y = labels[rows]
    loss = float(np.mean(logz - shifted[np.arange(len(rows)), y]))
    dsub = np.exp(shifted) / np.exp(logz)[:, None]
    dsub[np.arange(len(rows)), y] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[rows] = dsub / len(rows)
    return loss, dlogits


def _forward_backward(model, X, labels, mask, M, MT, drop_masks=None, head_mask=None):
    H, caches = _gcn_layers_forward(model, X, M, drop_masks)
    Zh = H @ model.w_in.T + model.b_a
    Ah = np.maximum(Zh, 0.0)
    if head_mask is not None:
        Ah = Ah * head_mask
    logits = Ah @ model.w_out.T + model.b_o
    loss, dlogits = _cross_entropy(logits, labels, mask)

    d_w_out = dlogits.T @ Ah
    d_b_o = dlogits.sum(axis=0)
    dAh = dlogits @ model.w_out
    if head_mask is not None:
        dAh = dAh * head_mask
    dZh = dAh * (Zh > 0)
    d_w_in = dZh.T @ H
    d_b_a = dZh.sum(axis=0)
    dH = dZh @ model.w_in

    layer_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for li in range(len(model.layers) - 1, -1, -1):
        W, B = model.layers[li]
        H_in, agg, Z = caches[li]
        if drop_masks is not None:
            dH = dH * drop_masks[li]
        dZ = dH * (Z > 0)
        dW = dZ.T @ agg
        dB = dZ.T @ H_in
        dH = MT @ (dZ @ W) + dZ @ B
        layer_grads.append((dW, dB))
    layer_grads.reverse()

    grads = []
    for dW, dB in layer_grads:
        grads.extend([dW, dB])
    grads.extend([d_w_in, d_b_a, d_w_out, d_b_o])
    return loss, grads


def loss_and_grads(graph: GraphData, model: GCNModel,
                   train_mask: np.ndarray | None = None):
    """Cross-entropy over masked nodes and gradients for every parameter,
    ordered like ``model.parameters()``."""
    mask = graph.train_mask if train_mask is None else train_mask
    M = mean_neighbor_operator(graph.adjacency)
    MT = M.T.tocsr()
    return _forward_backward(model, graph.features, graph.labels, mask, M, MT)


class _Adam:
    """Adaptive-moment updates, beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * np.square(g)
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)


class _SGD:
    def __init__(self, params):
        pass

    def step(self, params, grads, lr):
        for p, g in zip(params, grads):
            p -= lr * g


def _decay_mask(model: GCNModel) -> list[bool]:
    """Weight decay applies to weight matrices, not biases."""
    flags = []
    for _ in model.layers:
        flags.extend([True, True])
    flags.extend([True, False, True, False])
    return flags


def train(graph: GraphData, config: TrainConfig) -> GCNModel:
    """Fixed-epoch full-batch training; the per-epoch loss trace (computed
    before each update) is stored on the returned model."""
    model = init_gcn(graph.features.shape[1], graph.n_classes, config)
    M = mean_neighbor_operator(graph.adjacency)
    MT = M.T.tocsr()
    params = model.parameters()
    opt = _Adam(params) if config.optimizer == "adam" else _SGD(params)
    decay = _decay_mask(model)
    drop_rng = np.random.default_rng(config.seed + 1)
    n = graph.features.shape[0]

    trace = np.empty(config.epochs)
    for epoch in range(config.epochs):
        drop_masks = head_mask = None
        if config.dropout > 0.0:
            keep = 1.0 - config.dropout
            drop_masks = [
                (drop_rng.random((n, W.shape[0])) < keep) / keep
                for W, _ in model.layers
            ]
            head_mask = (drop_rng.random((n, config.head_hidden)) < keep) / keep
        loss, grads = _forward_backward(model, graph.features, graph.labels,
                                        graph.train_mask, M, MT,
                                        drop_masks, head_mask)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged (non-finite loss) at epoch {epoch}")
        trace[epoch] = loss
        if config.weight_decay > 0.0:
            grads = [g + config.weight_decay * p if use else g
                     for g, p, use in zip(grads, params, decay)]
        opt.step(params, grads, config.learning_rate)

    model.loss_trace = trace
    return model


def predict_proba(graph: GraphData, model: GCNModel) -> np.ndarray:
    M = mean_neighbor_operator(graph.adjacency)
    H = gcn_forward(graph, model, M)
    return softmax(head_forward(H, model))


def predict(graph: GraphData, model: GCNModel) -> np.ndarray:
    """Per-node argmax label (lowest index wins ties)."""
    M = mean_neighbor_operator(graph.adjacency)
    H = gcn_forward(graph, model, M)
    return head_forward(H, model).argmax(axis=1)


class MLPModel:
    """Feed-forward baseline: affine+relu hidden layers, affine output."""

    def __init__(self, hidden: list[tuple[np.ndarray, np.ndarray]],
                 w_out: np.ndarray, b_o: np.ndarray):
        self.hidden = hidden
        self.w_out = w_out
        self.b_o = b_o
        self.loss_trace: np.ndarray | None = None

    def parameters(self) -> list[np.ndarray]:
        params = []
        for W, b in self.hidden:
            params.extend([W, b])
        params.extend([self.w_out, self.b_o])
        return params

    def logits(self, X: np.ndarray) -> np.ndarray:
        H = X
        for W, b in self.hidden:
            H = np.maximum(H @ W.T + b, 0.0)
        return H @ self.w_out.T + self.b_o


def init_mlp(input_dim: int, n_classes: int, config: TrainConfig) -> MLPModel:
    rng = np.random.default_rng(config.seed)
    scale = config.weight_init_scale
    hidden = []
    prev = input_dim
    for width in config.hidden_dims:
        hidden.append((_uniform_init(rng, width, prev, scale),
                       _uniform_bias(rng, width, prev, scale)))
        prev = width
    return MLPModel(hidden, _uniform_init(rng, n_classes, prev, scale),
                    _uniform_bias(rng, n_classes, prev, scale))


def _mlp_forward_backward(model, X, y):
    acts = [X]
    zs = []
    H = X
    for W, b in model.hidden:
        Z = H @ W.T + b
        zs.append(Z)
        H = np.maximum(Z, 0.0)
        acts.append(H)
    logits = H @ model.w_out.T + model.b_o
    loss, dlogits = _cross_entropy(logits, y, np.ones(len(y), dtype=bool))

    grads_rev = [dlogits.sum(axis=0), dlogits.T @ acts[-1]]
    dH = dlogits @ model.w_out
    for li in range(len(model.hidden) - 1, -1, -1):
        W, _ = model.hidden[li]
        dZ = dH * (zs[li] > 0)
        grads_rev.append(dZ.sum(axis=0))
        grads_rev.append(dZ.T @ acts[li])
        dH = dZ @ W
    grads_rev.reverse()
    return loss, grads_rev


def train_mlp(X_train: np.ndarray, y_train: np.ndarray, n_classes: int,
              config: TrainConfig) -> MLPModel:
    model = init_mlp(X_train.shape[1], n_classes, config)
    params = model.parameters()
    opt = _Adam(params) if config.optimizer == "adam" else _SGD(params)
    trace = np.empty(config.epochs)
    for epoch in range(config.epochs):
        loss, grads = _mlp_forward_backward(model, X_train, y_train)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged (non-finite loss) at epoch {epoch}")
        trace[epoch] = loss
        if config.weight_decay > 0.0:
            grads = [g + config.weight_decay * p for g, p in zip(grads, params)]
        opt.step(params, grads, config.learning_rate)
    model.loss_trace = trace
    return model


def mlp_baseline_train_predict(features, labels, split, config: TrainConfig) -> np.ndarray:
    """Train the feed-forward baseline on the train rows, return test-row labels."""
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_classes = int(y.max()) + 1
    model = train_mlp(X[split.train], y[split.train], n_classes, config)
    return model.logits(X[split.test]).argmax(axis=1)


def save_checkpoint(model: GCNModel, config: TrainConfig, path: str | Path) -> None:
    """Versioned npz checkpoint with every parameter tensor and the config."""
    arrays = {}
    for li, (W, B) in enumerate(model.layers):
        arrays[f"W{li}"] = W
        arrays[f"B{li}"] = B
    arrays["w_in"] = model.w_in
    arrays["b_a"] = model.b_a
    arrays["w_out"] = model.w_out
    arrays["b_o"] = model.b_o
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_layers": len(model.layers),
        "dims": list(model.dims),
        "config": {
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "n_layers": config.n_layers,
            "hidden_dims": list(config.hidden_dims),
            "head_hidden": config.head_hidden,
            "weight_init_scale": config.weight_init_scale,
            "seed": config.seed,
            "optimizer": config.optimizer,
            "dropout": config.dropout,
            "weight_decay": config.weight_decay,
        },
    }
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: str | Path) -> tuple[GCNModel, TrainConfig]:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a model checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        layers = [(data[f"W{li}"], data[f"B{li}"]) for li in range(meta["n_layers"])]
        model = GCNModel(layers, data["w_in"], data["b_a"],
                         data["w_out"], data["b_o"])
    cfg = meta["config"]
    cfg["hidden_dims"] = tuple(cfg["hidden_dims"])
    return model, TrainConfig(**cfg)


def write_loss_trace(trace: np.ndarray, path: str | Path) -> None:
    """Loss trace as CSV with an ``epoch,loss`` header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(trace):
            fh.write(f"{epoch},{float(loss)!r}\n")
