"""Encoder-classifier MLP with hand-written backprop.

The encoder ``f`` is two affine layers with a rectifier between them; the head
``g`` is a single affine layer on the embedding, so ``h(x) = g(f(x))``.
Weights are stored ``(fan_in, fan_out)`` and act on row-vector batches.

Flattened parameter order is fixed: ``w1, b1, w2, b2, w3, b3``, each raveled
in C order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

PARAM_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3")
# (weight, bias) names of each linear layer, input side first
LAYERS = (("w1", "b1"), ("w2", "b2"), ("w3", "b3"))

_HEADER = struct.Struct("<4Q")


class MLPClassifier:
    def __init__(self, input_dim: int, hidden_dim: int, embed_dim: int, n_classes: int, params=None):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.embed_dim = int(embed_dim)
        self.n_classes = int(n_classes)
        if min(self.input_dim, self.hidden_dim, self.embed_dim, self.n_classes) < 1:
            raise ValueError("all layer sizes must be positive")
        if params is None:
            params = {name: np.zeros(shape) for name, shape in self.shapes().items()}
        self.params = {name: np.array(params[name], dtype=np.float64) for name in PARAM_ORDER}
        for name, shape in self.shapes().items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {self.params[name].shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"{name}: non-finite parameter")

    @classmethod
    def initialize(cls, input_dim, hidden_dim=64, embed_dim=64, n_classes=2, rng=None):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        model = cls(input_dim, hidden_dim, embed_dim, n_classes)
        for w, _ in LAYERS:
            fan_in, fan_out = model.params[w].shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            model.params[w] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        return model

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "w1": (self.input_dim, self.hidden_dim),
            "b1": (self.hidden_dim,),
            "w2": (self.hidden_dim, self.embed_dim),
            "b2": (self.embed_dim,),
            "w3": (self.embed_dim, self.n_classes),
            "b3": (self.n_classes,),
        }

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.input_dim, self.hidden_dim, self.embed_dim, self.n_classes

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())

    def copy(self) -> "MLPClassifier":
        return MLPClassifier(*self.dims, params=self.params)

    def embed(self, x) -> np.ndarray:
        return forward(self, x)[0]

    def logits(self, x) -> np.ndarray:
        return forward(self, x)[1]

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, MLPClassifier):
            return NotImplemented
        return self.dims == other.dims and all(
            np.array_equal(self.params[k], other.params[k]) for k in PARAM_ORDER
        )

    def __repr__(self):
        return "MLPClassifier(d_in={}, hidden={}, embed={}, classes={})".format(*self.dims)


def _check_input(model: MLPClassifier, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim or x.ndim not in (1, 2):
        raise ValueError(f"expected input of width {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def forward_cache(model: MLPClassifier, x: np.ndarray) -> dict[str, np.ndarray]:
    """Batched forward pass keeping the intermediates needed by :func:`backward`."""
    p = model.params
    z1 = x @ p["w1"] + p["b1"]
    a1 = np.maximum(z1, 0.0)
    emb = a1 @ p["w2"] + p["b2"]
    logits = emb @ p["w3"] + p["b3"]
    return {"x": x, "z1": z1, "a1": a1, "emb": emb, "logits": logits}


def forward(model: MLPClassifier, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(f(x), g(f(x)))`` for a single vector or a batch of rows."""
    x = _check_input(model, x)
    single = x.ndim == 1
    cache = forward_cache(model, np.atleast_2d(x))
    if single:
        return cache["emb"][0], cache["logits"][0]
    return cache["emb"], cache["logits"]


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input contains non-finite values")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def backward(model: MLPClassifier, cache, dlogits, demb=None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its derivative w.r.t. logits (and optionally embeddings)."""
    p = model.params
    grads = {"w3": cache["emb"].T @ dlogits, "b3": dlogits.sum(axis=0)}
    d_emb = dlogits @ p["w3"].T
    if demb is not None:
        d_emb = d_emb + demb
    grads["w2"] = cache["a1"].T @ d_emb
    grads["b2"] = d_emb.sum(axis=0)
    dz1 = (d_emb @ p["w2"].T) * (cache["z1"] > 0)
    grads["w1"] = cache["x"].T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return {k: grads[k] for k in PARAM_ORDER}


def _check_labels(model, ys, n):
    ys = np.asarray(ys)
    if ys.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {ys.shape}")
    if not np.issubdtype(ys.dtype, np.integer):
        raise ValueError("labels must be integers")
    if n and (ys.min() < 0 or ys.max() >= model.n_classes):
        raise ValueError(f"label out of range [0, {model.n_classes})")
    return ys


def ce_loss_and_grad(model: MLPClassifier, xs, ys) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its exact gradient."""
    xs = np.atleast_2d(_check_input(model, xs))
    if xs.shape[0] == 0:
        raise ValueError("empty batch")
    ys = _check_labels(model, ys, xs.shape[0])
    cache = forward_cache(model, xs)
    z = cache["logits"]
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    n = xs.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(log_norm - shifted[rows, ys]))
    dlogits = np.exp(shifted - log_norm[:, None])
    dlogits[rows, ys] -= 1.0
    dlogits /= n
    return loss, backward(model, cache, dlogits)


def ce_loss(model: MLPClassifier, xs, ys) -> float:
    return ce_loss_and_grad(model, xs, ys)[0]


def add_grads(*grad_sets, weights=None) -> dict[str, np.ndarray]:
    weights = weights or [1.0] * len(grad_sets)
    return {k: sum(w * g[k] for w, g in zip(weights, grad_sets)) for k in PARAM_ORDER}


def apply_step(model: MLPClassifier, grads, lr: float) -> MLPClassifier:
    """In-place descent step ``theta <- theta - lr * grads``."""
    if not np.isfinite(lr):
        raise ValueError("learning rate must be finite")
    for name in PARAM_ORDER:
        if grads[name].shape != model.params[name].shape:
            raise ValueError(f"{name}: gradient shape {grads[name].shape} does not match parameter")
    for name in PARAM_ORDER:
        model.params[name] -= lr * grads[name]
    return model


def flatten(model_or_grads) -> np.ndarray:
    params = model_or_grads.params if isinstance(model_or_grads, MLPClassifier) else model_or_grads
    return np.concatenate([np.ravel(params[k]) for k in PARAM_ORDER])


def split_flat(model: MLPClassifier, vec) -> dict[str, np.ndarray]:
    """View a flat vector as per-tensor arrays shaped like ``model``'s parameters."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (model.n_params,):
        raise ValueError(f"expected a flat vector of length {model.n_params}, got {vec.shape}")
    out, offset = {}, 0
    for name, shape in model.shapes().items():
        size = int(np.prod(shape))
        out[name] = vec[offset:offset + size].reshape(shape)
        offset += size
    return out


def unflatten(model: MLPClassifier, vec) -> MLPClassifier:
    """New model with ``model``'s dimensions and the parameters in ``vec``."""
    return MLPClassifier(*model.dims, params=split_flat(model, vec))


def ema_update(teacher: MLPClassifier, student: MLPClassifier, momentum: float) -> MLPClassifier:
    if not 0.0 <= momentum <= 1.0:
        raise ValueError(f"momentum must be in [0, 1], got {momentum}")
    if teacher.dims != student.dims:
        raise ValueError("teacher and student have different shapes")
    for name in PARAM_ORDER:
        teacher.params[name] = momentum * teacher.params[name] + (1.0 - momentum) * student.params[name]
    return teacher


def consistency_loss_and_grad(student: MLPClassifier, teacher: MLPClassifier, xs):
    """Mean squared logit gap between student and (fixed) teacher; gradient w.r.t. the student."""
    xs = np.atleast_2d(_check_input(student, xs))
    cache = forward_cache(student, xs)
    diff = cache["logits"] - forward_cache(teacher, xs)["logits"]
    n = xs.shape[0]
    loss = float(np.sum(diff * diff) / n)
    return loss, backward(student, cache, 2.0 * diff / n)


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_plain(model, x, y, epochs: int, lr: float, batch_size: int, rng, plateau_tol: float = 1e-4):
    """Mini-batch gradient descent on mean cross-entropy.

    Stops early once an epoch's mean batch loss improves by less than
    ``plateau_tol`` relative to the previous epoch. Returns the per-epoch losses.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    history = []
    for _ in range(epochs):
        losses = []
        for idx in iterate_minibatches(len(x), batch_size, rng):
            loss, grads = ce_loss_and_grad(model, x[idx], y[idx])
            apply_step(model, grads, lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if plateaued(history, plateau_tol):
            break
    return history


def plateaued(history, tol) -> bool:
    if len(history) < 2:
        return False
    prev, cur = history[-2], history[-1]
    return (prev - cur) < tol * max(abs(prev), 1e-12)


def save_checkpoint(model: MLPClassifier, path) -> None:
    """Write ``<4 x uint64 LE: d_in, hidden, embed, classes><float64 LE parameters>``."""
    payload = _HEADER.pack(*model.dims) + flatten(model).astype("<f8").tobytes()
    Path(path).write_bytes(payload)


def load_checkpoint(path) -> MLPClassifier:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    dims = _HEADER.unpack_from(raw)
    shell = MLPClassifier(*dims)
    body = raw[_HEADER.size:]
    if len(body) != 8 * shell.n_params:
        raise ValueError(f"{path}: expected {shell.n_params} parameters, found {len(body) / 8:g}")
    return unflatten(shell, np.frombuffer(body, dtype="<f8").astype(np.float64))
