"""The generation-replay pipeline and its ablations, plus the method registry."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .baselines import confident_subset, fit_from_scratch, learner_views, run_jt, run_pl_conf, run_st
from .config import TrainConfig
from .eval import Evaluator, RunResult
from .pseudo_label import (
    generate_pseudo_labels,
    gold_centroids,
    gold_label_embedding,
    update_lookback,
    write_trace_csv,
)
from .replay import SubspaceMemory, build_subspace, replay_train
from .stream import LabeledSet, StreamSegment


def run_generation_replay(gold: LabeledSet, segments: list[StreamSegment], cfg: TrainConfig, seed: int = 0,
                          generation: str = "robust", method: str = "ours", trace_dir=None) -> RunResult:
    """Per step: pseudo-label the new pool, keep a short lookback buffer, replay gold + buffer.

    ``generation="pl_conf"`` swaps clustering-based labelling for
    confidence-based selection while keeping the replay stage.
    """
    if generation not in ("robust", "pl_conf"):
        raise ValueError(f"unknown generation stage {generation!r}")
    model, rng = fit_from_scratch(gold, cfg, seed)
    teacher = model.copy() if cfg.mt_weight > 0 else None
    label_emb = gold_label_embedding(gold_centroids(model, gold), cfg.label_energy)
    if cfg.flat_region:
        mem = build_subspace(model, gold, cfg.subspace_energy, 0, cfg.subspace_rows)
    else:
        mem = SubspaceMemory.empty(model)
    ev = Evaluator(segments)
    buffer = None
    for view in learner_views(segments):
        if generation == "robust":
            trace = [] if trace_dir is not None else None
            labels, model = generate_pseudo_labels(model, gold, buffer, view.unlabeled, label_emb, cfg, rng,
                                                   teacher, trace)
            if trace is not None:
                write_trace_csv(trace, Path(trace_dir) / f"clusters_t{view.t:03d}.csv")
            ev.record_pseudo(view.t, labels)
            pseudo = LabeledSet(view.unlabeled, labels, gold.n_classes)
        else:
            idx, labels = confident_subset(model, view.unlabeled, cfg.pl_conf_size)
            ev.record_pseudo(view.t, labels, idx)
            pseudo = LabeledSet(view.unlabeled[idx], labels, gold.n_classes)
        buffer = update_lookback(pseudo, cfg.lookback, rng)
        model, mem = replay_train(model, gold, buffer, mem, cfg, rng, view.t)
        ev.record(view.t, model)
    return RunResult(method, ev.matrix, ev.pseudo_accuracy, model)


def _ours(gold, segments, cfg, seed=0, **kw):
    return run_generation_replay(gold, segments, cfg, seed, method="ours", **kw)


def _ours_wo_ils(gold, segments, cfg, seed=0, **kw):
    return run_generation_replay(gold, segments, cfg.with_(ils_weight=0.0), seed, method="ours_wo_ils", **kw)


def _ours_wo_fr(gold, segments, cfg, seed=0, **kw):
    return run_generation_replay(gold, segments, cfg.with_(flat_region=False), seed, method="ours_wo_fr", **kw)


def _ours_pl(gold, segments, cfg, seed=0, **kw):
    return run_generation_replay(gold, segments, cfg, seed, generation="pl_conf", method="ours_pl", **kw)


METHODS = {
    "st": run_st,
    "jt": run_jt,
    "pl_conf": run_pl_conf,
    "ours": _ours,
    "ours_wo_ils": _ours_wo_ils,
    "ours_wo_fr": _ours_wo_fr,
    "ours_pl": _ours_pl,
}
GENERATION_REPLAY = {"ours", "ours_wo_ils", "ours_wo_fr", "ours_pl"}


def run_method(name: str, gold: LabeledSet, segments: list[StreamSegment], cfg: TrainConfig, seed: int = 0,
               trace_dir=None) -> RunResult:
    try:
        fn = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    if trace_dir is not None and name in GENERATION_REPLAY:
        return fn(gold, segments, cfg, seed, trace_dir=trace_dir)
    return fn(gold, segments, cfg, seed)
