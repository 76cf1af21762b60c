"""From-scratch graph classifier: GCN layers, attention top-k pooling, max
readout, linear head, cross-entropy, and exact reverse-mode gradients.

Forward pass for one graph with normalized adjacency S and features X:

    Z_0 = X
    Z_l = relu(S @ Z_{l-1} @ W_l)          for l = 1..L, dropout after each
    score = tanh(Z_L @ w_att)
    keep the ceil(ratio * n) highest-scoring nodes (ties -> lower index)
    P = Z_L[kept] * score[kept, None]
    g = columnwise max of P, dropout, then logits = g @ W_mlp + b_mlp

Everything is float64 and deterministic: dropout masks come from a seeded
generator, and the backward pass treats the top-k selection and the max
argmax as constants of the forward pass, so analytic gradients match central
finite differences away from selection ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import VOCAB_SIZE, Graph, NormalizedAdjacency, normalize_adjacency, from_adjacency

N_CLASSES = 2


@dataclass(frozen=True)
class Hyperparams:
    layers: int = 2
    hidden: int = 200
    pooling_ratio: float = 0.8
    dropout_rate: float = 0.5
    epochs: int = 200
    batch_size: int = 4
    learning_rate: float = 0.001
    seed: int = 0

    def validate(self):
        if self.layers < 1 or self.hidden < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("layers, hidden, batch_size must be >= 1 and epochs >= 0")
        if not 0.0 < self.pooling_ratio <= 1.0:
            raise ValueError("pooling_ratio must be in (0, 1]")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")


@dataclass
class ModelParams:
    """All trainable weights; also reused as the gradient container."""

    gcn_weights: list[np.ndarray]   # layer l: (d_{l-1}, d_l)
    attention_weight: np.ndarray    # (d_L,)
    mlp_weight: np.ndarray          # (d_L, N_CLASSES)
    mlp_bias: np.ndarray            # (N_CLASSES,)

    def tensors(self) -> list[np.ndarray]:
        return [*self.gcn_weights, self.attention_weight, self.mlp_weight, self.mlp_bias]

    def tensor_names(self) -> list[str]:
        return [f"gcn_{i}" for i in range(len(self.gcn_weights))] + ["attention", "mlp_w", "mlp_b"]

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.gcn_weights], self.attention_weight.copy(),
                           self.mlp_weight.copy(), self.mlp_bias.copy())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors())


@dataclass(frozen=True)
class Prediction:
    label: int
    probability: np.ndarray   # (N_CLASSES,), sums to 1
    embedding: np.ndarray     # graph-level vector, (d_L,)


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    loss_trace: tuple[float, ...]   # mean sample loss per epoch


def _ceil_frac(x: float) -> int:
    # 1e-9 slop guard: 0.2 * 20 is 4.000000000000001 in binary
    return max(1, math.ceil(x - 1e-9))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_params(hyper: Hyperparams, rng: np.random.Generator, in_dim: int = VOCAB_SIZE) -> ModelParams:
    dims = [in_dim] + [hyper.hidden] * hyper.layers
    gcn = [_glorot(rng, dims[l], dims[l + 1], (dims[l], dims[l + 1])) for l in range(hyper.layers)]
    att = _glorot(rng, dims[-1], 1, (dims[-1],))
    mlp_w = _glorot(rng, dims[-1], N_CLASSES, (dims[-1], N_CLASSES))
    mlp_b = _glorot(rng, dims[-1], N_CLASSES, (N_CLASSES,))
    return ModelParams(gcn, att, mlp_w, mlp_b)


# ---------------------------------------------------------------------------
# forward ops


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def gcn_forward(s: NormalizedAdjacency, z_prev: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """One propagation step: relu(S @ Z @ W)."""
    if s.s.shape[1] != z_prev.shape[0] or z_prev.shape[1] != weight.shape[0]:
        raise ValueError(
            f"dimension mismatch: S {s.s.shape}, Z {z_prev.shape}, W {weight.shape}")
    return relu(s.s @ z_prev @ weight)


def topk_indices(scores: np.ndarray, ratio: float) -> np.ndarray:
    """Ascending indices of the ceil(ratio*n) highest scores; ties keep lower index."""
    k = _ceil_frac(ratio * scores.shape[0])
    order = np.argsort(-scores, kind="stable")[:k]
    return np.sort(order)


def attention_topk_pool(z: np.ndarray, s: NormalizedAdjacency, ratio: float,
                        attention_weight: np.ndarray) -> tuple[np.ndarray, NormalizedAdjacency, np.ndarray]:
    """Gate node rows by tanh attention scores and keep the top-k.

    Returns (gated kept rows, restricted re-normalized adjacency, kept indices).
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    scores = np.tanh(z @ attention_weight)
    kept = topk_indices(scores, ratio)
    z_kept = z[kept] * scores[kept, None]
    a_kept = s.a[np.ix_(kept, kept)]
    return z_kept, from_adjacency(a_kept), kept


def readout_max(z: np.ndarray) -> np.ndarray:
    """Columnwise max over node rows."""
    if z.shape[0] < 1:
        raise ValueError("readout over an empty node set")
    return z.max(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def loss_cross_entropy(logits: np.ndarray, label: int) -> float:
    """-log softmax(logits)[label], computed stably."""
    shifted = logits - logits.max()
    lse = math.log(np.exp(shifted).sum())
    return float(lse - shifted[label])


# ---------------------------------------------------------------------------
# full forward/backward for one sample

_MaskSet = tuple[list[np.ndarray], np.ndarray] | None   # per-layer masks, readout mask


def _draw_masks(rng: np.random.Generator, n: int, hyper: Hyperparams) -> _MaskSet:
    if hyper.dropout_rate == 0.0:
        return None
    keep = 1.0 - hyper.dropout_rate
    layer_masks = [(rng.random((n, hyper.hidden)) < keep).astype(np.float64)
                   for _ in range(hyper.layers)]
    readout_mask = (rng.random(hyper.hidden) < keep).astype(np.float64)
    return layer_masks, readout_mask


def _forward_sample(params: ModelParams, sn: NormalizedAdjacency, x: np.ndarray,
                    hyper: Hyperparams, masks: _MaskSet):
    """Run the full forward pass; returns (logits, embedding, cache for backward)."""
    if x.shape[1] != params.gcn_weights[0].shape[0]:
        raise ValueError(f"feature width {x.shape[1]} does not match layer-0 input "
                         f"width {params.gcn_weights[0].shape[0]}")
    keep = 1.0 - hyper.dropout_rate
    s = sn.s
    z = x
    layers = []   # (m = S @ z_in, a = m @ W, z_post_dropout)
    for l, w in enumerate(params.gcn_weights):
        m = s @ z
        a = m @ w
        z = relu(a)
        if masks is not None:
            z = z * masks[0][l] / keep
        layers.append((m, a, z))
    scores = np.tanh(z @ params.attention_weight)
    kept = topk_indices(scores, hyper.pooling_ratio)
    pooled = z[kept] * scores[kept, None]
    g = pooled.max(axis=0)
    arg_rows = pooled.argmax(axis=0)
    gd = g if masks is None else g * masks[1] / keep
    logits = gd @ params.mlp_weight + params.mlp_bias
    cache = (s, x, layers, scores, kept, pooled, arg_rows, g, gd)
    return logits, g, cache


def _backward_sample(params: ModelParams, hyper: Hyperparams, masks: _MaskSet,
                     cache, dlogits: np.ndarray, grads: ModelParams):
    """Accumulate d(loss)/d(params) into `grads` given d(loss)/d(logits)."""
    s, x, layers, scores, kept, pooled, arg_rows, g, gd = cache
    keep = 1.0 - hyper.dropout_rate

    grads.mlp_bias += dlogits
    grads.mlp_weight += np.outer(gd, dlogits)
    dgd = params.mlp_weight @ dlogits
    dg = dgd if masks is None else dgd * masks[1] / keep

    dpooled = np.zeros_like(pooled)
    dpooled[arg_rows, np.arange(pooled.shape[1])] = dg

    z_last = layers[-1][2]
    dz_kept = dpooled * scores[kept, None]
    dscores_kept = (dpooled * z_last[kept]).sum(axis=1)
    du = np.zeros(scores.shape[0])
    du[kept] = dscores_kept * (1.0 - scores[kept] ** 2)
    grads.attention_weight += z_last.T @ du

    dz = np.outer(du, params.attention_weight)
    dz[kept] += dz_kept

    for l in range(hyper.layers - 1, -1, -1):
        m, a, _ = layers[l]
        if masks is not None:
            dz = dz * masks[0][l] / keep
        da = dz * (a > 0.0)
        grads.gcn_weights[l] += m.T @ da
        if l > 0:
            dz = s.T @ (da @ params.gcn_weights[l].T)


def classify(params: ModelParams, graph: Graph, hyper: Hyperparams,
             training: bool = False, dropout_seed: int | None = None) -> Prediction:
    """Full forward pass on one graph; eval mode is deterministic."""
    masks = None
    if training and hyper.dropout_rate > 0.0:
        if dropout_seed is None:
            raise ValueError("training-mode classify needs a dropout_seed")
        masks = _draw_masks(np.random.default_rng(dropout_seed), graph.n, hyper)
    logits, embedding, _ = _forward_sample(params, normalize_adjacency(graph), graph.features,
                                           hyper, masks)
    probs = softmax(logits)
    return Prediction(int(np.argmax(probs)), probs, embedding)


def gradients(params: ModelParams, batch, hyper: Hyperparams, step_seed: int) -> tuple[ModelParams, float]:
    """Exact gradients of the mean batch loss, plus that loss.

    Dropout masks are drawn per sample, in batch order, from a generator
    seeded with `step_seed`; with dropout disabled the result is a pure
    function of (params, batch), so duplicating the whole batch leaves the
    mean gradient unchanged.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    rng = np.random.default_rng(step_seed)
    grads = ModelParams([np.zeros_like(w) for w in params.gcn_weights],
                        np.zeros_like(params.attention_weight),
                        np.zeros_like(params.mlp_weight),
                        np.zeros_like(params.mlp_bias))
    total = 0.0
    inv = 1.0 / len(batch)
    for sample in batch:
        graph, label = sample.graph, sample.label
        masks = _draw_masks(rng, graph.n, hyper)
        logits, _, cache = _forward_sample(params, normalize_adjacency(graph), graph.features,
                                           hyper, masks)
        total += loss_cross_entropy(logits, label)
        dlogits = softmax(logits)
        dlogits[label] -= 1.0
        _backward_sample(params, hyper, masks, cache, dlogits * inv, grads)
    return grads, total * inv


def batch_loss(params: ModelParams, batch, hyper: Hyperparams, step_seed: int) -> float:
    """Mean batch loss under the same masks `gradients` would use (FD oracle hook)."""
    rng = np.random.default_rng(step_seed)
    total = 0.0
    for sample in batch:
        masks = _draw_masks(rng, sample.graph.n, hyper)
        logits, _, _ = _forward_sample(params, normalize_adjacency(sample.graph),
                                       sample.graph.features, hyper, masks)
        total += loss_cross_entropy(logits, sample.label)
    return total / len(batch)


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def train(dataset, hyper: Hyperparams) -> TrainResult:
    """Mini-batch training, fully reproducible from (dataset, hyper).

    Per epoch: seeded shuffle, batches of `batch_size` (last partial batch
    kept), Adam updates at `learning_rate`.  Plain non-adaptive descent at
    the stock 0.001 rate leaves this architecture's loss flat at ln 2 for
    the whole budget (the attention gate squares an already-small signal),
    so the update rule is Adam with the standard moment constants.  Raises
    ValueError if the dataset is single-class or a parameter goes
    non-finite.
    """
    hyper.validate()
    labels = {s.label for s in dataset}
    if len(labels) < 2:
        raise ValueError("training dataset must contain both classes")
    rng = np.random.default_rng(hyper.seed)
    params = init_params(hyper, rng, in_dim=dataset[0].graph.features.shape[1])
    m = [np.zeros_like(t) for t in params.tensors()]
    v = [np.zeros_like(t) for t in params.tensors()]
    trace: list[float] = []
    n = len(dataset)
    step = 0
    for _epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hyper.batch_size):
            batch = [dataset[i] for i in perm[start:start + hyper.batch_size]]
            step_seed = int(rng.integers(2 ** 63))
            grads, loss = gradients(params, batch, hyper, step_seed)
            epoch_loss += loss * len(batch)
            step += 1
            bias1 = 1.0 - ADAM_BETA1 ** step
            bias2 = 1.0 - ADAM_BETA2 ** step
            for p, g, mi, vi in zip(params.tensors(), grads.tensors(), m, v):
                mi *= ADAM_BETA1
                mi += (1.0 - ADAM_BETA1) * g
                vi *= ADAM_BETA2
                vi += (1.0 - ADAM_BETA2) * g * g
                p -= hyper.learning_rate * (mi / bias1) / (np.sqrt(vi / bias2) + ADAM_EPS)
        if not params.all_finite():
            raise ValueError(f"non-finite parameter after epoch {_epoch}")
        trace.append(epoch_loss / n)
    return TrainResult(params, tuple(trace))
