"""Robust pseudo-label generation.

Supervised warm start on gold + lookback data, prototype clustering of the new
segment in embedding space, and refinement of the prototypes against the label
subspace fixed on the gold set. All prototype arithmetic is done on
unit-normalised embeddings so cosine assignment and mean updates agree.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .linalg import NORM_EPS, DegenerateVectorError, energy_basis, svd
from .model import (
    MLPClassifier,
    add_grads,
    apply_step,
    backward,
    ce_loss_and_grad,
    consistency_loss_and_grad,
    ema_update,
    forward_cache,
    softmax,
    train_plain,
)
from .stream import LabeledSet

MASS_EPS = 1e-8


@dataclass
class CentroidSet:
    u: np.ndarray  # d x C, column c is the class-c prototype
    counts: np.ndarray  # points assigned per class

    @property
    def n_classes(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class LabelEmbedding:
    basis: np.ndarray  # C x r, orthonormal columns

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def label_factor(self) -> np.ndarray:
        return self.basis.T

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def normalize_rows(emb) -> np.ndarray:
    emb = np.atleast_2d(np.asarray(emb, dtype=np.float64))
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms <= NORM_EPS):
        raise DegenerateVectorError(f"{int(np.sum(norms <= NORM_EPS))} embedding(s) have zero norm")
    return emb / norms[:, None]


def weighted_centroids(probs, emb) -> CentroidSet:
    """Per-class softmax-weighted mean of embeddings.

    A class whose total weight is below 1e-8 falls back to the global mean and
    gets count 0. Counts are the number of rows whose argmax is the class.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    emb = np.atleast_2d(np.asarray(emb, dtype=np.float64))
    if len(emb) == 0:
        raise ValueError("cannot initialise centroids from an empty segment")
    mass = probs.sum(axis=0)
    safe = np.where(mass < MASS_EPS, 1.0, mass)
    u = (emb.T @ probs) / safe
    counts = np.bincount(np.argmax(probs, axis=1), minlength=probs.shape[1])
    empty = mass < MASS_EPS
    if empty.any():
        u[:, empty] = emb.mean(axis=0)[:, None]
        counts[empty] = 0
    return CentroidSet(u, counts)


def init_centroids(model: MLPClassifier, x) -> CentroidSet:
    """Prototypes from the current model's soft predictions on the new segment."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if len(x) == 0:
        raise ValueError("cannot initialise centroids from an empty segment")
    cache = forward_cache(model, x)
    return weighted_centroids(softmax(cache["logits"]), normalize_rows(cache["emb"]))


def assign_labels(centroids: CentroidSet, embeddings) -> np.ndarray:
    """Nearest prototype by cosine distance; ties go to the lowest class index.

    A zero prototype is treated as orthogonal to everything (distance 1).
    """
    e = normalize_rows(embeddings)
    u = centroids.u
    if u.shape[0] != e.shape[1]:
        raise ValueError(f"embedding width {e.shape[1]} does not match centroid width {u.shape[0]}")
    norms = np.linalg.norm(u, axis=0)
    unit = np.divide(u, norms, out=np.zeros_like(u), where=norms > NORM_EPS)
    dist = 1.0 - e @ unit
    return np.argmin(dist, axis=1)


def update_centroids(embeddings, labels, prev: CentroidSet) -> CentroidSet:
    """Class means of the assigned embeddings; an empty class keeps its previous prototype."""
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels)
    n_classes = prev.n_classes
    if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    counts = np.bincount(labels, minlength=n_classes)
    sums = np.zeros_like(prev.u)
    np.add.at(sums.T, labels, emb)
    u = prev.u.copy()
    filled = counts > 0
    u[:, filled] = sums[:, filled] / counts[filled]
    return CentroidSet(u, counts)


def gold_centroids(model: MLPClassifier, gold: LabeledSet) -> np.ndarray:
    emb = normalize_rows(forward_cache(model, gold.x)["emb"])
    u = np.zeros((emb.shape[1], gold.n_classes))
    for c in range(gold.n_classes):
        members = gold.y == c
        if members.any():
            u[:, c] = emb[members].mean(axis=0)
    return u


def gold_label_embedding(u0, energy: float = 0.9) -> LabelEmbedding:
    """Right singular basis of the gold prototype matrix, truncated by spectral energy."""
    u0 = np.asarray(u0, dtype=np.float64)
    if not np.any(u0):
        raise ValueError("gold centroid matrix has rank 0")
    # right singular vectors of U0 are the left singular vectors of U0^T
    basis = energy_basis(u0.T, energy)
    if basis.shape[1] == 0:
        basis = svd(u0).right[:, :1]
    return LabelEmbedding(basis)


def refine_centroids(u, emb: LabelEmbedding) -> np.ndarray:
    """Closest matrix to ``u`` of the form ``H^T V`` with ``V`` the fixed label factor.

    Because the label factor has orthonormal rows, the minimising ``H^T`` is
    ``u B`` and the reconstruction is ``u B B^T``.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape[1] != emb.basis.shape[0]:
        raise ValueError(f"centroid matrix has {u.shape[1]} classes, label basis {emb.basis.shape[0]}")
    return (u @ emb.basis) @ emb.basis.T


def ils_penalty(u, emb: LabelEmbedding) -> float:
    r = u - refine_centroids(u, emb)
    return float(np.sum(r * r))


def ils_loss_and_grad(model: MLPClassifier, x, labels, prev: CentroidSet, emb: LabelEmbedding):
    """Refinement residual of the prototypes recomputed from ``model``, with its gradient.

    Prototypes of non-empty classes are class means of normalised embeddings,
    so the residual depends on the encoder; empty classes are held fixed.
    """
    cache = forward_cache(model, x)
    z = cache["emb"]
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms <= NORM_EPS):
        raise DegenerateVectorError("zero-norm embedding in refinement loss")
    e = z / norms[:, None]
    cents = update_centroids(e, labels, prev)
    resid_proj = np.eye(emb.basis.shape[0]) - emb.projector
    r = cents.u @ resid_proj
    loss = float(np.sum(r * r))
    d_u = 2.0 * r @ resid_proj.T
    counts = cents.counts
    d_e = d_u[:, labels].T / np.maximum(counts[labels], 1)[:, None]
    d_z = (d_e - e * np.sum(e * d_e, axis=1, keepdims=True)) / norms[:, None]
    grads = backward(model, cache, np.zeros_like(cache["logits"]), demb=d_z)
    return loss, grads


def update_lookback(pseudo: LabeledSet, size: int, rng) -> LabeledSet:
    """Keep at most ``size`` pseudo-labelled pairs, uniformly subsampled."""
    if len(pseudo) <= size:
        return pseudo
    idx = np.sort(np.random.default_rng(rng).choice(len(pseudo), size=size, replace=False))
    return pseudo.subset(idx)


def generate_pseudo_labels(model: MLPClassifier, gold: LabeledSet, prev_pseudo: LabeledSet | None, x_t,
                           emb: LabelEmbedding, cfg: TrainConfig, rng=None, teacher: MLPClassifier | None = None,
                           trace: list | None = None):
    """Label every row of ``x_t``; returns ``(labels, model)``, the model updated in place.

    Refinement against ``emb`` (and its loss term) is active only when
    ``cfg.ils_weight > 0``. With ``cfg.cluster_iters == 0`` the labels are the
    nearest-prototype assignment of the softmax-weighted initial prototypes.
    """
    rng = np.random.default_rng(rng)
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    use_ils = cfg.ils_weight > 0
    seen = LabeledSet.concat(gold, prev_pseudo) if prev_pseudo is not None and len(prev_pseudo) else gold

    if cfg.gen_epochs > 0:
        train_plain(model, seen.x, seen.y, cfg.gen_epochs, cfg.lr, cfg.batch_size, rng, cfg.plateau_tol)

    cents = init_centroids(model, x_t)
    labels = None
    for it in range(cfg.cluster_iters):
        e = normalize_rows(forward_cache(model, x_t)["emb"])
        if use_ils:
            cents = CentroidSet(refine_centroids(cents.u, emb), cents.counts)
        new_labels = assign_labels(cents, e)
        changed = len(new_labels) if labels is None else int(np.sum(new_labels != labels))
        labels = new_labels
        cents = update_centroids(e, labels, cents)
        if use_ils:
            cents = CentroidSet(refine_centroids(cents.u, emb), cents.counts)
        if trace is not None:
            trace.append({"iteration": it, "changed": changed, "centroids": cents.u.copy()})

        _, g_ce = ce_loss_and_grad(model, seen.x, seen.y)
        _, g_pl = ce_loss_and_grad(model, x_t, labels)
        parts, weights = [g_ce, g_pl], [1.0, 1.0]
        if use_ils:
            _, g_ils = ils_loss_and_grad(model, x_t, labels, cents, emb)
            parts.append(g_ils)
            weights.append(cfg.ils_weight)
        if teacher is not None and cfg.mt_weight > 0:
            _, g_mt = consistency_loss_and_grad(model, teacher, x_t)
            parts.append(g_mt)
            weights.append(cfg.mt_weight)
        apply_step(model, add_grads(*parts, weights=weights), cfg.lr)
        if teacher is not None:
            ema_update(teacher, model, cfg.mt_momentum)
        if it > 0 and changed < cfg.cluster_tol * len(labels):
            break

    e = normalize_rows(forward_cache(model, x_t)["emb"])
    return assign_labels(cents, e), model


def write_trace_csv(trace: list, path) -> None:
    """One row per clustering iteration: iteration, changed, then the prototype matrix raveled by class."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not trace:
            w.writerow(["iteration", "changed"])
            return
        d, c = trace[0]["centroids"].shape
        w.writerow(["iteration", "changed"] + [f"u{k}_{i}" for k in range(c) for i in range(d)])
        for row in trace:
            w.writerow([row["iteration"], row["changed"]] + [repr(float(v)) for v in row["centroids"].T.ravel()])
