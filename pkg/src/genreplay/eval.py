"""Accuracy matrix and stream metrics.

``R[i][j]`` (1-based) is the accuracy on step ``j``'s test split of the model
obtained after adapting through step ``i``; only ``j <= i`` is populated.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stream import StreamSegment, oracle_access


def accuracy(preds, truth) -> float:
    preds, truth = np.asarray(preds), np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if preds.size == 0:
        raise ValueError("accuracy of an empty prediction set")
    return float(np.mean(preds == truth))


class AccMatrix:
    def __init__(self, steps: int):
        if steps < 1:
            raise ValueError("need at least one step")
        self.steps = int(steps)
        self.values = np.full((steps, steps), np.nan)

    @classmethod
    def from_rows(cls, rows) -> "AccMatrix":
        r = cls(len(rows))
        for i, row in enumerate(rows, start=1):
            for j, v in enumerate(row, start=1):
                if v is not None and not (isinstance(v, float) and math.isnan(v)):
                    r[i, j] = v
        return r

    def __setitem__(self, ij, value):
        i, j = ij
        if not (1 <= j <= i <= self.steps):
            raise IndexError(f"R[{i}][{j}] is outside the lower triangle of a {self.steps}-step matrix")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"accuracy {value} outside [0, 1]")
        self.values[i - 1, j - 1] = value

    def __getitem__(self, ij) -> float:
        i, j = ij
        return float(self.values[i - 1, j - 1])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def final_row(self) -> np.ndarray:
        return self.values[-1].copy()

    def to_csv(self, path) -> None:
        """One row per adaptation step; columns are test steps; cells above the diagonal empty."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step"] + [f"test_{j}" for j in range(1, self.steps + 1)])
            for i in range(self.steps):
                cells = ["" if np.isnan(v) else repr(float(v)) for v in self.values[i]]
                w.writerow([i + 1] + cells)

    @classmethod
    def read_csv(cls, path) -> "AccMatrix":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls.from_rows([[float(c) if c else None for c in row[1:]] for row in rows])


def acc_t(r: AccMatrix) -> float:
    """Mean of the diagonal: how well each step's model does on its own step."""
    d = r.diagonal()
    if np.isnan(d).any():
        raise ValueError(f"diagonal entry missing at step {int(np.argmax(np.isnan(d))) + 1}")
    return float(d.mean())


def acc_T(r: AccMatrix) -> float:
    """Mean of the final row: how well the last model remembers every step."""
    f = r.final_row()
    if np.isnan(f).any():
        raise ValueError(f"final-row entry missing at test step {int(np.argmax(np.isnan(f))) + 1}")
    return float(f.mean())


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof=1; 0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("nothing to aggregate")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


class Evaluator:
    """Holds the labelled test splits; the only place besides JT that reads stream labels."""

    def __init__(self, segments: list[StreamSegment]):
        self.segments = list(segments)
        with oracle_access():
            self._tests = [(s.test_features, s.test_labels.copy()) for s in self.segments]
            self._hidden = [s.hidden_unlabeled_labels.copy() for s in self.segments]
        self.matrix = AccMatrix(len(self.segments))
        self.pseudo_accuracy: dict[int, float] = {}

    def record(self, step: int, model) -> None:
        for j in range(1, step + 1):
            x, y = self._tests[j - 1]
            self.matrix[step, j] = accuracy(model.predict(x), y)

    def record_pseudo(self, step: int, labels, rows=None) -> float:
        """Accuracy of pseudo-labels against the hidden truth of step ``step`` (optionally a row subset)."""
        truth = self._hidden[step - 1]
        acc = accuracy(labels, truth if rows is None else truth[rows])
        self.pseudo_accuracy[step] = acc
        return acc

    def pooled_test(self, upto: int | None = None):
        parts = self._tests[: upto or len(self._tests)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class RunResult:
    method: str
    acc: AccMatrix
    pseudo_accuracy: dict = field(default_factory=dict)
    model: object = None
    probe: list | None = None

    @property
    def acc_t(self) -> float:
        return acc_t(self.acc)

    @property
    def acc_T(self) -> float:
        return acc_T(self.acc)

    @property
    def mean_pseudo_accuracy(self) -> float:
        if not self.pseudo_accuracy:
            return float("nan")
        return float(np.mean(list(self.pseudo_accuracy.values())))
