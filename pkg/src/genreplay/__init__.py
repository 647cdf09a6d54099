"""Semi-supervised learning on drifting streams with a short lookback.

Pseudo-labels come from prototype clustering in embedding space, anchored to the
label subspace of the initial labelled set; forgetting is held back by replay
that only moves weights outside a subspace protecting earlier data.
"""
from .config import TrainConfig
from .eval import AccMatrix, RunResult, acc_T, acc_t, mean_std
from .framework import METHODS, run_generation_replay, run_method
from .model import MLPClassifier
from .stream import DriftSpec, LabeledSet, StreamSegment, generate_drift_stream, load_csv, preset, segment_stream

__all__ = [
    "AccMatrix", "DriftSpec", "LabeledSet", "METHODS", "MLPClassifier", "RunResult", "StreamSegment", "TrainConfig",
    "acc_T", "acc_t", "generate_drift_stream", "load_csv", "mean_std", "preset", "run_generation_replay",
    "run_method", "segment_stream",
]
