"""Config-driven experiment runner.

Config grammar: one ``dotted.key = value`` per line; ``#`` starts a comment;
blank lines are ignored; lists are comma-separated; booleans are
``true``/``false``. Every key is optional and unknown keys are rejected. The
full key table with defaults is ``SCHEMA`` below and is printed by
``genreplay keys``.

Verbs::

    genreplay run <config | manifest.json> [--cell METHOD:SEED]
    genreplay probe <checkpoint> <testset.csv> [--bounds ...] [--draws N] [--seed S]
    genreplay gen-stream <spec> <out-dir>
    genreplay keys

Output layout: ``<out>/<dataset>/<method>/seed<k>/{R.csv, summary.txt, probe.csv, model.bin}``
plus ``<out>/<dataset>/summary.csv`` and ``<out>/<dataset>/manifest.json``.
``GENREPLAY_OUTPUT`` overrides ``run.output``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .eval import Evaluator, mean_std
from .framework import GENERATION_REPLAY, METHODS, run_method
from .model import load_checkpoint, save_checkpoint
from .replay import flatness_probe, write_probe_csv
from .stream import (
    PRESETS,
    DriftSpec,
    LabeledSet,
    generate_drift_stream,
    induce_drift_order,
    load_csv,
    oracle_access,
    preset,
    segment_stream,
    write_csv,
)

log = logging.getLogger("genreplay")

OUTPUT_ENV = "GENREPLAY_OUTPUT"
EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# value parsers -------------------------------------------------------------

def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _list(conv):
    def parse(s: str):
        return tuple(conv(p.strip()) for p in s.split(",") if p.strip())
    return parse


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "none") else int(s)


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _fraction(v):
    return 0.0 < v <= 1.0


def _unit(v):
    return 0.0 <= v <= 1.0


_T = TrainConfig()

# key -> (parser, default, check, description)
SCHEMA: dict[str, tuple] = {
    "dataset.source": (str, "synthetic", lambda v: v in ("synthetic", "csv"), "synthetic | csv"),
    "dataset.preset": (str, "ug_2c_2d", lambda v: v in PRESETS, "synthetic preset: " + ", ".join(PRESETS)),
    "dataset.path": (str, "", None, "CSV file (features..., label) when source = csv"),
    "dataset.header": (_bool, False, None, "skip the first CSV line"),
    "dataset.drift_order": (_bool, True, None, "reorder CSV rows along the first principal component"),
    "dataset.name": (str, "", None, "output folder name (default: preset name or CSV stem)"),
    "stream.per_step": (_opt_int, None, lambda v: v is None or v > 1, "rows per step (default: preset size)"),
    "stream.test_count": (_opt_int, None, lambda v: v is None or v > 0, "test rows per step (default: 30%)"),
    "stream.steps": (_opt_int, None, lambda v: v is None or v > 0, "number of stream steps (default 20 / all)"),
    "stream.seed": (_opt_int, None, lambda v: v is None or v >= 0, "fixed stream seed (default: the run seed)"),
    "model.hidden_dim": (int, _T.hidden_dim, _positive, "hidden width"),
    "model.embed_dim": (int, _T.embed_dim, _positive, "embedding width"),
    "train.lr": (float, _T.lr, _positive, "plain-descent step size"),
    "train.batch_size": (int, _T.batch_size, _positive, "mini-batch size"),
    "train.pretrain_epochs": (int, _T.pretrain_epochs, _non_negative, "epochs on the gold set"),
    "train.epochs": (int, _T.epochs, _non_negative, "replay / retraining epochs per step"),
    "train.gen_epochs": (int, _T.gen_epochs, _non_negative, "refresh epochs before clustering"),
    "train.plateau_tol": (float, _T.plateau_tol, _non_negative, "relative loss-plateau stop"),
    "pseudo.cluster_iters": (int, _T.cluster_iters, _non_negative, "clustering iterations K"),
    "pseudo.cluster_tol": (float, _T.cluster_tol, _non_negative, "stop when this fraction of labels changes"),
    "pseudo.ils_weight": (float, _T.ils_weight, _non_negative, "label-semantics loss weight (0 disables)"),
    "pseudo.label_energy": (float, _T.label_energy, _fraction, "energy kept in the gold label basis"),
    "pseudo.lookback": (int, _T.lookback, _positive, "pseudo-labelled rows kept for replay"),
    "pseudo.pl_conf_size": (int, _T.pl_conf_size, _positive, "rows kept by confidence selection"),
    "replay.eta1": (float, _T.eta1, _non_negative, "perturbation ascent step"),
    "replay.eta2": (float, _T.eta2, _positive, "weight descent step"),
    "replay.subspace_energy": (float, _T.subspace_energy, _fraction, "energy kept in the protected subspace"),
    "replay.subspace_rows": (int, _T.subspace_rows, _positive, "row cap when building the subspace"),
    "mt.weight": (float, _T.mt_weight, _non_negative, "mean-teacher consistency weight (0 = off)"),
    "mt.momentum": (float, _T.mt_momentum, _unit, "mean-teacher EMA momentum"),
    "run.methods": (_list(str), ("st", "jt", "pl_conf", "ours"),
                    lambda v: len(v) > 0 and all(m in METHODS for m in v), "methods: " + ", ".join(METHODS)),
    "run.seeds": (_list(int), (0, 1, 2, 3, 4), lambda v: len(v) > 0 and all(s >= 0 for s in v), "seeds"),
    "run.probe_bounds": (_list(float), (), lambda v: all(b >= 0 for b in v), "noise bounds (empty = no probe)"),
    "run.probe_draws": (int, 20, _positive, "noise draws per bound"),
    "run.output": (str, "results", lambda v: bool(v), "output root"),
    "run.workers": (int, 1, _positive, "parallel cells"),
    "run.checkpoint": (_bool, True, None, "write model.bin per cell"),
    "run.trace": (_bool, False, None, "write per-iteration clustering traces"),
}

_TRAIN_KEYS = {
    "model.hidden_dim": "hidden_dim", "model.embed_dim": "embed_dim", "train.lr": "lr",
    "train.batch_size": "batch_size", "train.pretrain_epochs": "pretrain_epochs", "train.epochs": "epochs",
    "train.gen_epochs": "gen_epochs", "train.plateau_tol": "plateau_tol", "pseudo.cluster_iters": "cluster_iters",
    "pseudo.cluster_tol": "cluster_tol", "pseudo.ils_weight": "ils_weight", "pseudo.label_energy": "label_energy",
    "pseudo.lookback": "lookback", "pseudo.pl_conf_size": "pl_conf_size", "replay.eta1": "eta1",
    "replay.eta2": "eta2", "replay.subspace_energy": "subspace_energy", "replay.subspace_rows": "subspace_rows",
    "mt.weight": "mt_weight", "mt.momentum": "mt_momentum",
}


@dataclass
class RunConfig:
    values: dict  # every schema key, resolved
    train: TrainConfig = field(init=False)

    def __post_init__(self):
        self.train = TrainConfig(**{attr: self.values[k] for k, attr in _TRAIN_KEYS.items()})

    def __getitem__(self, key):
        return self.values[key]

    @property
    def dataset_name(self) -> str:
        if self["dataset.name"]:
            return self["dataset.name"]
        if self["dataset.source"] == "csv":
            return Path(self["dataset.path"]).stem
        return self["dataset.preset"]

    @property
    def output_root(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self["run.output"])

    def lines(self) -> list[str]:
        """The resolved config in the input grammar, one key per line."""
        return [f"{k} = {_render(v)}" for k, v in self.values.items()]


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_render(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def resolve(raw: dict[str, str]) -> RunConfig:
    """Validate ``key -> text`` pairs and fill defaults."""
    values = {}
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
    for key, (conv, default, check, _) in SCHEMA.items():
        if key not in raw:
            values[key] = default
            continue
        try:
            value = conv(raw[key])
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {raw[key]!r} ({exc})") from None
        if check is not None and not check(value):
            raise ConfigError(key, f"invalid value {raw[key]!r}")
        values[key] = value
    if values["dataset.source"] == "csv":
        if not values["dataset.path"]:
            raise ConfigError("dataset.path", "required when dataset.source = csv")
        for key in ("stream.per_step", "stream.test_count"):
            if values[key] is None:
                raise ConfigError(key, "required when dataset.source = csv")
    per_step, test_count = values["stream.per_step"], values["stream.test_count"]
    if per_step is not None and test_count is not None and test_count >= per_step:
        raise ConfigError("stream.test_count", f"must be smaller than stream.per_step ({per_step})")
    return RunConfig(values)


def parse_text(text: str, origin: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}", "expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw:
            raise ConfigError(key, f"duplicate key ({origin}:{lineno})")
        raw[key] = value
    return raw


def parse_config(path) -> RunConfig:
    """Read a config file, or the config stored in a manifest written by a previous run."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"{path} does not exist")
    if path.suffix == ".json":
        try:
            lines = json.loads(path.read_text())["config"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError("config", f"{path} is not a run manifest") from None
        return resolve(parse_text("\n".join(lines), str(path)))
    return resolve(parse_text(path.read_text(), str(path)))


# streams --------------------------------------------------------------------

def build_stream(cfg: RunConfig, seed: int):
    """Gold set and segments for one run seed; methods sharing a seed see the same stream."""
    stream_seed = seed if cfg["stream.seed"] is None else cfg["stream.seed"]
    steps = cfg["stream.steps"]
    if cfg["dataset.source"] == "synthetic":
        per_step = cfg["stream.per_step"] or preset(cfg["dataset.preset"]).instances_per_step
        overrides = {"seed": stream_seed, "steps": steps or 20, "instances_per_step": per_step}
        if cfg["stream.test_count"] is not None:
            overrides["test_fraction"] = cfg["stream.test_count"] / per_step
        return generate_drift_stream(preset(cfg["dataset.preset"], **overrides))
    data = load_csv(cfg["dataset.path"], header=cfg["dataset.header"])
    if cfg["dataset.drift_order"]:
        data = data.subset(induce_drift_order(data))
    gold, segments = segment_stream(data, cfg["stream.per_step"], cfg["stream.test_count"], stream_seed)
    return gold, segments[:steps] if steps else segments


# cells ----------------------------------------------------------------------

def _write_summary(path: Path, fields: dict) -> None:
    path.write_text("".join(f"{k} = {v}\n" for k, v in fields.items()))


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def run_cell(cfg: RunConfig, method: str, seed: int) -> dict:
    """Run one (method, seed) cell into its own directory; never raises."""
    dataset = cfg.dataset_name
    rel = Path(dataset) / method / f"seed{seed}"
    cell_dir = cfg.output_root / rel
    record = {"method": method, "seed": seed, "dir": rel.as_posix(), "status": "ok", "artifacts": []}
    started = time.perf_counter()
    try:
        cell_dir.mkdir(parents=True, exist_ok=True)
        gold, segments = build_stream(cfg, seed)
        trace_dir = None
        if cfg["run.trace"] and method in GENERATION_REPLAY:
            trace_dir = cell_dir / "trace"
            trace_dir.mkdir(exist_ok=True)
        result = run_method(method, gold, segments, cfg.train, seed, trace_dir=trace_dir)
        result.acc.to_csv(cell_dir / "R.csv")
        record["artifacts"].append((rel / "R.csv").as_posix())
        fields = {"run_id": f"{dataset}/{method}/seed{seed}", "dataset": dataset, "method": method, "seed": seed,
                  "acc_t": repr(result.acc_t), "acc_T": repr(result.acc_T),
                  "pseudo_accuracy": repr(result.mean_pseudo_accuracy), "steps": len(segments)}
        if cfg["run.probe_bounds"]:
            x, y = Evaluator(segments).pooled_test()
            rows = flatness_probe(result.model, LabeledSet(x, y, gold.n_classes), cfg["run.probe_bounds"],
                                  cfg["run.probe_draws"], seed)
            write_probe_csv(rows, cell_dir / "probe.csv")
            record["artifacts"].append((rel / "probe.csv").as_posix())
        if cfg["run.checkpoint"]:
            save_checkpoint(result.model, cell_dir / "model.bin")
            record["artifacts"].append((rel / "model.bin").as_posix())
        _write_summary(cell_dir / "summary.txt", fields)
        record["artifacts"].append((rel / "summary.txt").as_posix())
        if trace_dir is not None:
            record["artifacts"].extend(sorted((rel / "trace" / p.name).as_posix() for p in trace_dir.iterdir()))
        record.update(acc_t=result.acc_t, acc_T=result.acc_T, pseudo_accuracy=result.mean_pseudo_accuracy)
    except Exception as exc:  # a failed cell must not stop the grid
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["traceback"] = traceback.format_exc()
    record["seconds"] = round(time.perf_counter() - started, 3)
    return record


def _run_cell_job(values: dict, method: str, seed: int) -> dict:
    return run_cell(RunConfig(values), method, seed)


class Manifest:
    """Single-writer manifest: only the parent process touches the file.

    Cells already recorded under the same config are kept, so re-running a
    single cell updates its entry instead of discarding the rest.
    """

    def __init__(self, cfg: RunConfig, path: Path):
        self.path = path
        self.doc = {"dataset": cfg.dataset_name, "output_root": str(cfg.output_root), "config": cfg.lines(),
                    "cells": []}
        if path.is_file():
            try:
                old = json.loads(path.read_text())
            except ValueError:
                old = None
            if isinstance(old, dict) and old.get("config") == self.doc["config"]:
                self.doc["cells"] = list(old.get("cells", []))

    @property
    def cells(self) -> list[dict]:
        return self.doc["cells"]

    def append(self, record: dict) -> None:
        entry = {k: (None if isinstance(v, float) and np.isnan(v) else v)
                 for k, v in record.items() if k not in ("traceback", "seconds")}
        entry["rerun"] = f"genreplay run {self.path.name} --cell {record['method']}:{record['seed']}"
        cells = [c for c in self.cells if (c["method"], c["seed"]) != (record["method"], record["seed"])]
        cells.append(entry)
        cells.sort(key=lambda c: (c["method"], c["seed"]))
        self.doc["cells"] = cells
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.doc, indent=2) + "\n")
        tmp.replace(self.path)


def write_aggregate(records: list[dict], path: Path, methods) -> None:
    """Mean and sample std per method over the seeds that finished."""
    cols = ("acc_t", "acc_T", "pseudo_accuracy")
    lines = ["method,runs," + ",".join(f"{c}_mean,{c}_std" for c in cols)]
    for m in methods:
        ok = [r for r in records if r["method"] == m and r["status"] == "ok"]
        if not ok:
            lines.append(f"{m},0" + ",," * len(cols))
            continue
        cells = []
        for c in cols:
            vals = [r.get(c) for r in ok]
            if any(v is None or np.isnan(v) for v in vals):
                cells += ["", ""]
            else:
                mu, sd = mean_std(vals)
                cells += [repr(mu), repr(sd)]
        lines.append(f"{m},{len(ok)}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def run_experiment(cfg: RunConfig, cells=None) -> int:
    """Run every (method, seed) cell; returns the process exit status."""
    log.info("resolved config:\n  %s", "\n  ".join(cfg.lines()))
    grid = cells or [(m, s) for m in cfg["run.methods"] for s in cfg["run.seeds"]]
    ds_dir = cfg.output_root / cfg.dataset_name
    ds_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(cfg, ds_dir / "manifest.json")
    records = []

    def finish(rec):
        records.append(rec)
        manifest.append(rec)
        if rec["status"] == "ok":
            log.info("%s seed %d: acc_t %.4f acc_T %.4f (%.1fs)", rec["method"], rec["seed"], rec["acc_t"],
                     rec["acc_T"], rec["seconds"])
        else:
            log.error("%s seed %d failed: %s\n%s", rec["method"], rec["seed"], rec["error"], rec["traceback"])

    workers = min(cfg["run.workers"], len(grid))
    if workers <= 1:
        for m, s in grid:
            finish(run_cell(cfg, m, s))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell_job, cfg.values, m, s) for m, s in grid]
            for fut in as_completed(futures):
                finish(fut.result())
    methods = list(dict.fromkeys([m for m, _ in grid] + [c["method"] for c in manifest.cells]))
    write_aggregate(manifest.cells, ds_dir / "summary.csv", methods)
    failed = sum(r["status"] != "ok" for r in records)
    if failed:
        log.error("%d of %d cells failed; see %s", failed, len(records), manifest.path)
        return EXIT_PARTIAL
    return EXIT_OK


# stream specs ---------------------------------------------------------------

_SPEC_KEYS = {"preset": str, "instances_per_step": int, "steps": int, "test_fraction": float, "seed": int,
              "std": float, "start_means": _list(float), "velocities": _list(float), "shape": _list(int),
              "class_weights": _list(float)}


def parse_stream_spec(path) -> DriftSpec:
    """A ``key = value`` drift description: a preset with overrides, or explicit means and velocities.

    Explicit geometry gives ``shape = classes, modes, dims`` and flattened
    ``start_means`` / ``velocities`` in that order.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("spec", f"{path} does not exist")
    raw = parse_text(path.read_text(), str(path))
    vals = {}
    for key, text in raw.items():
        if key not in _SPEC_KEYS:
            raise ConfigError(key, "unknown stream-spec key")
        try:
            vals[key] = _SPEC_KEYS[key](text)
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {text!r} ({exc})") from None
    geometry = {k: vals.pop(k) for k in ("start_means", "velocities", "shape") if k in vals}
    name = vals.pop("preset", None)
    try:
        if geometry:
            if set(geometry) != {"start_means", "velocities", "shape"}:
                raise ConfigError("shape", "explicit geometry needs shape, start_means and velocities")
            if name is not None:
                raise ConfigError("preset", "give either a preset or explicit geometry, not both")
            shape = geometry["shape"]
            if len(shape) != 3:
                raise ConfigError("shape", "expected classes, modes, dims")
            try:
                start = np.reshape(geometry["start_means"], shape)
            except ValueError:
                raise ConfigError("start_means", f"needs {int(np.prod(shape))} values") from None
            try:
                vel = np.reshape(geometry["velocities"], shape)
            except ValueError:
                raise ConfigError("velocities", f"needs {int(np.prod(shape))} values") from None
            return DriftSpec(start, vel, **vals)
        if name is None:
            raise ConfigError("preset", "missing (or give explicit geometry)")
        return preset(name, **vals)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("spec", str(exc)) from None


def write_stream(spec: DriftSpec, out_dir) -> list[Path]:
    """Materialise a drift stream as CSVs: the gold block, then per step the pool and the test split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gold, segments = generate_drift_stream(spec)
    paths = [out / "gold.csv"]
    write_csv(paths[0], gold.x, gold.y)
    with oracle_access():  # writing labels to disk is an oracle operation
        for seg in segments:
            pool, test = out / f"step{seg.t:03d}_unlabeled.csv", out / f"step{seg.t:03d}_test.csv"
            write_csv(pool, seg.unlabeled, seg.hidden_unlabeled_labels)
            write_csv(test, seg.test_features, seg.test_labels)
            paths += [pool, test]
        xs = [gold.x] + [np.vstack([s.unlabeled, s.test_features]) for s in segments]
        ys = [gold.y] + [np.concatenate([s.hidden_unlabeled_labels, s.test_labels]) for s in segments]
    paths.append(out / "stream.csv")
    write_csv(paths[-1], np.vstack(xs), np.concatenate(ys))
    return paths


# entry point ----------------------------------------------------------------

def _parse_cell(text: str):
    method, _, seed = text.partition(":")
    if method not in METHODS or not seed.isdigit():
        raise argparse.ArgumentTypeError(f"expected METHOD:SEED with METHOD in {sorted(METHODS)}")
    return method, int(seed)


def _floats(text: str):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genreplay", description="Semi-supervised drifted-stream experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run a config (or re-run cells from a manifest)")
    run.add_argument("config")
    run.add_argument("--cell", action="append", type=_parse_cell, metavar="METHOD:SEED",
                     help="run only this cell (repeatable)")

    probe = sub.add_parser("probe", help="flatness probe of a checkpoint on a labelled CSV")
    probe.add_argument("checkpoint")
    probe.add_argument("testset")
    probe.add_argument("--bounds", type=_floats, default=[0.0, 0.02, 0.05, 0.1, 0.2])
    probe.add_argument("--draws", type=int, default=20)
    probe.add_argument("--seed", type=int, default=0)
    probe.add_argument("--header", action="store_true", help="skip the first CSV line")
    probe.add_argument("--out", help="write probe CSV here instead of stdout")

    gen = sub.add_parser("gen-stream", help="write a synthetic drift stream to CSV files")
    gen.add_argument("spec")
    gen.add_argument("out")

    sub.add_parser("keys", help="list config keys and defaults")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.verb == "keys":
            for key, (_, default, _, desc) in SCHEMA.items():
                print(f"{key} = {_render(default)}    # {desc}")
            return EXIT_OK
        if args.verb == "run":
            return run_experiment(parse_config(args.config), args.cell)
        if args.verb == "gen-stream":
            paths = write_stream(parse_stream_spec(args.spec), args.out)
            log.info("wrote %d files under %s", len(paths), args.out)
            return EXIT_OK
        if args.verb == "probe":
            if args.draws < 1 or any(b < 0 for b in args.bounds):
                raise ConfigError("probe", "draws must be positive and bounds non-negative")
            model = load_checkpoint(args.checkpoint)
            test = load_csv(args.testset, header=args.header, remap=False)
            if test.x.shape[1] != model.input_dim or test.n_classes > model.n_classes:
                raise ConfigError("testset", f"shape {test.x.shape} / {test.n_classes} classes does not fit "
                                             f"a model with {model.input_dim} inputs and {model.n_classes} classes")
            rows = flatness_probe(model, test, args.bounds, args.draws, args.seed)
            if args.out:
                write_probe_csv(rows, args.out)
            else:
                print("b,mean_acc,std_acc")
                for b, m, s in rows:
                    print(f"{b!r},{m!r},{s!r}")
            return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
