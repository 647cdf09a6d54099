"""Reference pipelines: supervised-only (ST), joint oracle training (JT), confident pseudo-labelling (PL-conf)."""
from __future__ import annotations

import numpy as np

from .config import TrainConfig
from .eval import Evaluator, RunResult
from .model import MLPClassifier, softmax, train_plain
from .stream import LabeledSet, SegmentView, StreamSegment, oracle_access


def rngs(seed: int):
    """Independent generators for initialisation and for training-time sampling."""
    return np.random.default_rng([seed, 1]), np.random.default_rng([seed, 2])


def fit_from_scratch(data: LabeledSet, cfg: TrainConfig, seed: int, input_dim=None, n_classes=None):
    """Fresh seeded model trained with plain descent for ``cfg.pretrain_epochs``."""
    init_rng, train_rng = rngs(seed)
    model = MLPClassifier.initialize(input_dim or data.x.shape[1], cfg.hidden_dim, cfg.embed_dim,
                                     n_classes or data.n_classes, init_rng)
    train_plain(model, data.x, data.y, cfg.pretrain_epochs, cfg.lr, cfg.batch_size, train_rng, cfg.plateau_tol)
    return model, train_rng


def learner_views(segments: list[StreamSegment]) -> list[SegmentView]:
    views = [s.view() for s in segments]
    for v in views:
        assert isinstance(v, SegmentView) and not hasattr(v, "test_labels")
    return views


def confident_subset(model: MLPClassifier, x, size: int):
    """Indices of the ``size`` most confident rows (ties keep the earlier row) and their predicted labels."""
    probs = softmax(model.logits(x))
    conf = probs.max(axis=1)
    idx = np.argsort(-conf, kind="stable")[:size]
    return idx, probs.argmax(axis=1)[idx]


def run_st(gold: LabeledSet, segments: list[StreamSegment], cfg: TrainConfig, seed: int = 0) -> RunResult:
    model, _ = fit_from_scratch(gold, cfg, seed)
    ev = Evaluator(segments)
    for view in learner_views(segments):
        ev.record(view.t, model)
    return RunResult("st", ev.matrix, model=model)


def run_jt(gold: LabeledSet, segments: list[StreamSegment], cfg: TrainConfig, seed: int = 0) -> RunResult:
    """Retrain from scratch at every step on gold plus every true-labelled pool so far."""
    ev = Evaluator(segments)
    seen = [gold]
    model = None
    for seg in segments:
        with oracle_access():
            seen.append(LabeledSet(seg.unlabeled, seg.hidden_unlabeled_labels, gold.n_classes))
        model, _ = fit_from_scratch(LabeledSet.concat(*seen), cfg, seed, gold.x.shape[1], gold.n_classes)
        ev.record(seg.t, model)
    return RunResult("jt", ev.matrix, model=model)


def run_pl_conf(gold: LabeledSet, segments: list[StreamSegment], cfg: TrainConfig, seed: int = 0) -> RunResult:
    model, rng = fit_from_scratch(gold, cfg, seed)
    ev = Evaluator(segments)
    for view in learner_views(segments):
        idx, labels = confident_subset(model, view.unlabeled, cfg.pl_conf_size)
        ev.record_pseudo(view.t, labels, idx)
        buffer = LabeledSet(view.unlabeled[idx], labels, gold.n_classes)
        data = LabeledSet.concat(gold, buffer)
        train_plain(model, data.x, data.y, cfg.epochs, cfg.lr, cfg.batch_size, rng, cfg.plateau_tol)
        ev.record(view.t, model)
    return RunResult("pl_conf", ev.matrix, ev.pseudo_accuracy, model)
