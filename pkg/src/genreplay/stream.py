"""Drifted stream construction: synthetic Gaussian drift, CSV ingestion, segmentation.

Labels of stream segments are hidden behind :func:`oracle_access`. A learner
only ever receives a :class:`SegmentView`, which carries the unlabeled pool and
nothing else; reading a segment's test or hidden labels outside an
``oracle_access()`` block raises :class:`LeakageError`.
"""
from __future__ import annotations

import contextlib
import contextvars
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import svd

log = logging.getLogger(__name__)

_ORACLE = contextvars.ContextVar("genreplay_oracle", default=False)


class LeakageError(RuntimeError):
    """A learner tried to read labels it is not entitled to."""


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@contextlib.contextmanager
def oracle_access():
    token = _ORACLE.set(True)
    try:
        yield
    finally:
        _ORACLE.reset(token)


@dataclass
class LabeledSet:
    x: np.ndarray
    y: np.ndarray
    n_classes: int | None = None
    label_map: dict | None = None  # original label -> dense index, when remapped

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.x.shape}")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} feature rows but {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("features contain non-finite values")
        if self.n_classes is None:
            self.n_classes = int(self.y.max()) + 1 if len(self.y) else 0
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "LabeledSet":
        return LabeledSet(self.x[idx], self.y[idx], self.n_classes, self.label_map)

    @staticmethod
    def concat(*sets: "LabeledSet") -> "LabeledSet":
        sets = [s for s in sets if s is not None]
        n_classes = max(s.n_classes for s in sets)
        width = next(s.x.shape[1] for s in sets)
        x = np.concatenate([s.x.reshape(-1, width) for s in sets])
        y = np.concatenate([s.y for s in sets])
        return LabeledSet(x, y, n_classes)


@dataclass(frozen=True)
class SegmentView:
    """What the learner sees of time slot ``t``: unlabeled features only."""
    t: int
    unlabeled: np.ndarray


class StreamSegment:
    def __init__(self, t, unlabeled, test_features, test_labels, hidden_unlabeled_labels):
        if t < 1:
            raise ValueError("stream segments are indexed from t = 1")
        self.t = int(t)
        self.unlabeled = np.asarray(unlabeled, dtype=np.float64)
        self.test_features = np.asarray(test_features, dtype=np.float64)
        self._test_labels = np.asarray(test_labels, dtype=np.int64)
        self._hidden = np.asarray(hidden_unlabeled_labels, dtype=np.int64)
        if len(self._hidden) != len(self.unlabeled):
            raise ValueError("hidden labels must match the unlabeled rows")
        if len(self._test_labels) != len(self.test_features):
            raise ValueError("test labels must match the test rows")

    @property
    def test_labels(self) -> np.ndarray:
        if not _ORACLE.get():
            raise LeakageError(f"test labels of segment {self.t} read outside oracle_access()")
        return self._test_labels

    @property
    def hidden_unlabeled_labels(self) -> np.ndarray:
        if not _ORACLE.get():
            raise LeakageError(f"hidden labels of segment {self.t} read outside oracle_access()")
        return self._hidden

    def view(self) -> SegmentView:
        return SegmentView(self.t, self.unlabeled)

    def test_set(self, n_classes=None) -> LabeledSet:
        return LabeledSet(self.test_features, self.test_labels, n_classes)

    def __repr__(self):
        return f"StreamSegment(t={self.t}, unlabeled={len(self.unlabeled)}, test={len(self.test_features)})"


@dataclass
class DriftSpec:
    """Gaussian classes whose mode means travel in straight lines.

    ``start_means`` and ``velocities`` have shape (classes, modes, dims);
    velocity is feature-space distance per time step.
    """
    start_means: np.ndarray
    velocities: np.ndarray
    std: float = 1.0
    instances_per_step: int = 1000
    steps: int = 20
    test_fraction: float = 0.3
    seed: int = 0
    class_weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.start_means = np.asarray(self.start_means, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.start_means.ndim != 3 or self.start_means.shape != self.velocities.shape:
            raise ValueError("start_means and velocities must share shape (classes, modes, dims)")
        if not np.all(np.isfinite(self.velocities)) or not np.all(np.isfinite(self.start_means)):
            raise ValueError("means and velocities must be finite")
        if not self.std > 0:
            raise ValueError("std must be positive")
        if self.steps < 1:
            raise ValueError("need at least one stream step")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.class_weights is None:
            self.class_weights = np.full(self.class_count, 1.0 / self.class_count)
        self.class_weights = np.asarray(self.class_weights, dtype=np.float64)
        self.class_weights = self.class_weights / self.class_weights.sum()

    @property
    def class_count(self) -> int:
        return self.start_means.shape[0]

    @property
    def modes_per_class(self) -> int:
        return self.start_means.shape[1]

    @property
    def dims(self) -> int:
        return self.start_means.shape[2]

    @property
    def test_count(self) -> int:
        return int(round(self.test_fraction * self.instances_per_step))

    def means_at(self, t: int) -> np.ndarray:
        return self.start_means + t * self.velocities


def _crossing_pair(dims: int, separation: float, speed: float):
    """Two classes starting ``separation`` apart on axis 0, drifting in opposite diagonal directions.

    Their tracks are parallel lines, so the union over time stays separable,
    but the boundary learned at t = 0 is crossed part-way through the stream.
    """
    start = np.zeros((2, 1, dims))
    start[0, 0, 0], start[1, 0, 0] = -separation / 2, separation / 2
    direction = np.zeros(dims)
    direction[0] = 1.0
    direction[1:] = 1.0 / np.sqrt(dims - 1) if dims > 1 else 0.0
    vel = np.zeros((2, 1, dims))
    vel[0, 0], vel[1, 0] = speed * direction, -speed * direction
    return start, vel


def preset(name: str, **overrides) -> DriftSpec:
    """Desk-scale analogues of the UG_2C_*D / MG_2C_2D benchmark family."""
    key = name.lower()
    if key in ("ug_2c_2d", "ug_2c_3d", "ug_2c_5d"):
        dims = int(key[-2])
        start, vel = _crossing_pair(dims, separation=6.0, speed=0.3)
        per_step = 1000 if dims == 2 else 2000
    elif key == "mg_2c_2d":
        # each class: two modes leaving a common start in mirrored directions
        start = np.array([[[-3.0, 0.0], [-3.0, 0.0]], [[3.0, 0.0], [3.0, 0.0]]])
        vel = np.array([[[0.2, 0.25], [0.2, -0.25]], [[-0.2, 0.25], [-0.2, -0.25]]])
        per_step = 2000
    else:
        raise ValueError(f"unknown synthetic preset {name!r}")
    kwargs = dict(start_means=start, velocities=vel, std=1.0, instances_per_step=per_step,
                  steps=20, test_fraction=0.3, seed=0)
    kwargs.update(overrides)
    return DriftSpec(**kwargs)


PRESETS = ("ug_2c_2d", "ug_2c_3d", "ug_2c_5d", "mg_2c_2d")


def _split(x, y, t, test_count, rng) -> StreamSegment:
    perm = rng.permutation(len(y))
    test_idx, pool_idx = np.sort(perm[:test_count]), np.sort(perm[test_count:])
    return StreamSegment(t, x[pool_idx], x[test_idx], y[test_idx], y[pool_idx])


def generate_drift_stream(spec: DriftSpec) -> tuple[LabeledSet, list[StreamSegment]]:
    """Sample the gold set (t = 0) and ``spec.steps`` drifted segments."""
    rng = np.random.default_rng(spec.seed)
    n = spec.instances_per_step
    gold, segments = None, []
    for t in range(spec.steps + 1):
        means = spec.means_at(t)
        y = rng.choice(spec.class_count, size=n, p=spec.class_weights)
        modes = rng.integers(spec.modes_per_class, size=n)
        x = means[y, modes] + spec.std * rng.standard_normal((n, spec.dims))
        if t == 0:
            gold = LabeledSet(x, y, spec.class_count)
        else:
            segments.append(_split(x, y, t, spec.test_count, rng))
    return gold, segments


def load_csv(path, header: bool = False, remap: bool = True) -> LabeledSet:
    """Read ``feature,...,feature,label`` rows; labels are remapped to a dense 0..C-1 index.

    With ``remap=False`` labels are kept as given (they must be non-negative),
    which is what a test file scored against an existing model needs.
    """
    path = Path(path)
    rows, raw_labels, linenos, width = [], [], [], None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise CsvFormatError(path, lineno, "need at least one feature and a label")
            elif len(row) != width:
                raise CsvFormatError(path, lineno, f"expected {width} fields, found {len(row)}")
            try:
                feats = [float(c) for c in row[:-1]]
            except ValueError:
                raise CsvFormatError(path, lineno, "non-numeric feature value") from None
            try:
                label = float(row[-1])
            except ValueError:
                raise CsvFormatError(path, lineno, f"non-numeric label {row[-1]!r}") from None
            if not label.is_integer():
                raise CsvFormatError(path, lineno, f"label {row[-1]!r} is not an integer")
            if not all(np.isfinite(feats)):
                raise CsvFormatError(path, lineno, "non-finite feature value")
            rows.append(feats)
            raw_labels.append(int(label))
            linenos.append(lineno)
    if not rows:
        raise CsvFormatError(path, 0, "file contains no data rows")
    if not remap:
        bad = next((i for i, v in enumerate(raw_labels) if v < 0), None)
        if bad is not None:
            raise CsvFormatError(path, linenos[bad], f"negative label {raw_labels[bad]}")
        y = np.array(raw_labels, dtype=np.int64)
        return LabeledSet(np.array(rows, dtype=np.float64), y, int(y.max()) + 1)
    values = sorted(set(raw_labels))
    mapping = {v: i for i, v in enumerate(values)}
    if any(k != v for k, v in mapping.items()):
        log.info("%s: labels remapped %s", path, mapping)
    y = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return LabeledSet(np.array(rows, dtype=np.float64), y, len(values), mapping)


def write_csv(path, x, y) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row, label in zip(np.asarray(x), np.asarray(y)):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def induce_drift_order(data: LabeledSet, seed=None) -> np.ndarray:
    """Permutation sorting rows by their first-principal-component score.

    Ties keep the original order. The component's sign is fixed so that its
    largest-magnitude loading is positive. ``seed`` is accepted for call-site
    symmetry with the other stream builders; the ordering is deterministic.
    """
    n = len(data)
    if n < 2:
        raise ValueError("need at least two rows to order")
    centered = data.x - data.x.mean(axis=0)
    if not np.any(np.abs(centered) > 1e-12 * max(1.0, np.abs(data.x).max())):
        return np.arange(n)
    direction = svd(centered).right[:, 0]
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    return np.argsort(centered @ direction, kind="stable")


def segment_stream(data: LabeledSet, per_step: int, test_count: int, seed) -> tuple[LabeledSet, list[StreamSegment]]:
    """First ``per_step`` rows become the gold set; each later block becomes a segment."""
    if not 0 < test_count < per_step:
        raise ValueError("need 0 < test_count < per_step")
    n = len(data)
    if n < 2 * per_step:
        raise ValueError(f"need at least {2 * per_step} rows for one gold block and one segment, got {n}")
    rng = np.random.default_rng(seed)
    gold = data.subset(np.arange(per_step))
    n_segments = n // per_step - 1
    dropped = n - (n_segments + 1) * per_step
    if dropped:
        log.warning("dropping %d trailing rows that do not fill a segment of %d", dropped, per_step)
    segments = []
    for k in range(n_segments):
        lo = (k + 1) * per_step
        block = slice(lo, lo + per_step)
        segments.append(_split(data.x[block], data.y[block], k + 1, test_count, rng))
    return gold, segments
