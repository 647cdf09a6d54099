"""Anti-forgetting replay: a minimax game between the weights and a subspace-bound perturbation.

The protected subspace is built per linear layer from the layer's inputs on
previously seen data (a ones column stands in for the bias). A weight-gradient
of a linear layer is a sum of outer products ``input x delta``, so its
component in the span of old inputs is exactly the part that changes the
layer's outputs on old data. The perturbation ``xi`` ascends the loss inside
that span; the weights descend only in its orthogonal complement.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .linalg import energy_basis
from .model import (
    LAYERS,
    PARAM_ORDER,
    MLPClassifier,
    apply_step,
    ce_loss_and_grad,
    flatten,
    forward_cache,
    iterate_minibatches,
    plateaued,
    unflatten,
)
from .stream import LabeledSet


@dataclass
class SubspaceMemory:
    bases: list  # one (fan_in + 1) x k orthonormal matrix per linear layer
    energy: float = 1.0
    time_index: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, model: MLPClassifier, time_index: int = 0) -> "SubspaceMemory":
        widths = (model.input_dim, model.hidden_dim, model.embed_dim)
        return cls([np.zeros((w + 1, 0)) for w in widths], 0.0, time_index)

    @property
    def ranks(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    @property
    def is_empty(self) -> bool:
        return all(k == 0 for k in self.ranks)


def layer_inputs(model: MLPClassifier, x) -> list[np.ndarray]:
    """Bias-augmented input rows of each linear layer."""
    cache = forward_cache(model, np.atleast_2d(x))
    ones = np.ones((cache["x"].shape[0], 1))
    return [np.hstack([a, ones]) for a in (cache["x"], cache["a1"], cache["emb"])]


def build_subspace(model: MLPClassifier, sample: LabeledSet | np.ndarray, energy: float,
                   time_index: int = 0, max_rows: int | None = None) -> SubspaceMemory:
    x = sample.x if isinstance(sample, LabeledSet) else np.atleast_2d(np.asarray(sample, dtype=np.float64))
    if len(x) == 0:
        return SubspaceMemory.empty(model, time_index)
    if max_rows is not None and len(x) > max_rows:
        x = x[np.linspace(0, len(x) - 1, max_rows).round().astype(int)]
    bases = [energy_basis(a.T, energy) for a in layer_inputs(model, x)]
    return SubspaceMemory(bases, energy, time_index)


def _stack(grads, w, b):
    return np.vstack([grads[w], grads[b][None, :]])


def project_grads(grads: dict, mem: SubspaceMemory, complement: bool = False) -> dict:
    """Layer-wise projection onto the protected subspace (or its orthogonal complement)."""
    out = {}
    for (w, b), basis in zip(LAYERS, mem.bases):
        g = _stack(grads, w, b)
        if basis.shape[1]:
            inside = basis @ (basis.T @ g)
        else:
            inside = np.zeros_like(g)
        p = g - inside if complement else inside
        out[w], out[b] = p[:-1], p[-1]
    return {k: out[k] for k in PARAM_ORDER}


def _perturbed_grads(model, xi, x, y):
    probe = unflatten(model, flatten(model) + xi)
    return ce_loss_and_grad(probe, x, y)


def xi_step(xi, model: MLPClassifier, batch, mem: SubspaceMemory, eta1: float):
    """Ascent on the perturbation, restricted to the protected subspace."""
    x, y = batch
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (model.n_params,):
        raise ValueError(f"perturbation length {xi.shape} does not match {model.n_params} parameters")
    _, grads = _perturbed_grads(model, xi, x, y)
    return xi + eta1 * flatten(project_grads(grads, mem))


def theta_step(model: MLPClassifier, xi, batch, mem: SubspaceMemory, eta2: float):
    """Descent at the perturbed point along the complement of the protected subspace; in place."""
    x, y = batch
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (model.n_params,):
        raise ValueError(f"perturbation length {xi.shape} does not match {model.n_params} parameters")
    loss, grads = _perturbed_grads(model, xi, x, y)
    apply_step(model, project_grads(grads, mem, complement=True), eta2)
    return model, loss


def replay_train(model: MLPClassifier, gold: LabeledSet, pseudo: LabeledSet | None, mem: SubspaceMemory,
                 cfg: TrainConfig, rng=None, time_index: int = 0):
    """Alternate weight and perturbation updates over gold + pseudo mini-batches.

    ``xi`` starts at zero and is dropped afterwards. Returns the model (updated
    in place) and a memory rebuilt from the same data for the next step.
    """
    rng = np.random.default_rng(rng)
    data = LabeledSet.concat(gold, pseudo) if pseudo is not None and len(pseudo) else gold
    xi = np.zeros(model.n_params)
    history = []
    for _ in range(cfg.epochs):
        losses = []
        for idx in iterate_minibatches(len(data), cfg.batch_size, rng):
            batch = (data.x[idx], data.y[idx])
            _, loss = theta_step(model, xi, batch, mem, cfg.eta2)
            if cfg.flat_region and cfg.eta1 > 0 and not mem.is_empty:
                xi = xi_step(xi, model, batch, mem, cfg.eta1)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if plateaued(history, cfg.plateau_tol):
            break
    if cfg.flat_region:
        new_mem = build_subspace(model, data, cfg.subspace_energy, time_index, cfg.subspace_rows)
    else:
        new_mem = SubspaceMemory.empty(model, time_index)
    new_mem.meta["loss_history"] = history
    return model, new_mem


def accuracy_of(model: MLPClassifier, x, y) -> float:
    return float(np.mean(model.predict(x) == y))


def flatness_probe(model: MLPClassifier, test: LabeledSet, bounds, draws: int = 20, seed=0):
    """Mean/std accuracy under uniform parameter noise in ``[-b, b]`` for each bound ``b``.

    Returns ``[(b, mean_acc, std_acc), ...]``; ``model`` is left untouched.
    """
    if draws < 1:
        raise ValueError("need at least one noise draw")
    rng = np.random.default_rng(seed)
    theta = flatten(model)
    rows = []
    for b in bounds:
        if b < 0:
            raise ValueError(f"noise bound must be non-negative, got {b}")
        if b == 0:
            # no noise: every draw is the clean model, reported exactly
            rows.append((0.0, accuracy_of(model, test.x, test.y), 0.0))
            continue
        accs = [accuracy_of(unflatten(model, theta + rng.uniform(-b, b, size=theta.shape)), test.x, test.y)
                for _ in range(draws)]
        rows.append((float(b), float(np.mean(accs)), float(np.std(accs))))
    return rows


def write_probe_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["b", "mean_acc", "std_acc"])
        for b, mean, std in rows:
            w.writerow([repr(b), repr(mean), repr(std)])

