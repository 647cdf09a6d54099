import json

import numpy as np
import pytest

from genreplay import cli
from genreplay.cli import ConfigError, main, parse_config, parse_stream_spec, read_summary, run_experiment
from genreplay.eval import AccMatrix
from genreplay.model import load_checkpoint
from genreplay.stream import load_csv

TINY = """\
# tiny drifted stream
stream.per_step = 120   # rows per step
stream.steps = 3
train.pretrain_epochs = 20
train.epochs = 5
"""


def _write(path, text):
    path.write_text(text)
    return path


@pytest.fixture(autouse=True)
def _no_env_override(monkeypatch):
    monkeypatch.delenv(cli.OUTPUT_ENV, raising=False)


def test_minimal_config_fills_defaults(tmp_path, caplog):
    cfg = parse_config(_write(tmp_path / "c.txt", ""))
    assert cfg["pseudo.lookback"] == 100
    assert cfg["replay.eta1"] == 0.01 and cfg["replay.eta2"] == 0.01
    assert cfg["run.seeds"] == (0, 1, 2, 3, 4)
    assert cfg.train.lookback == 100 and cfg.train.eta1 == 0.01
    lines = cfg.lines()
    assert "pseudo.lookback = 100" in lines
    # the resolved text parses back to the same config
    assert parse_config(_write(tmp_path / "r.txt", "\n".join(lines))).values == cfg.values


@pytest.mark.parametrize("text,key", [
    ("pseudo.lookback = -1", "lookback"),
    ("replay.eta1 = fast", "replay.eta1"),
    ("train.epochs = 2\ntrain.epochs = 3", "train.epochs"),
    ("model.depth = 3", "model.depth"),
    ("run.methods = st, record", "run.methods"),
    ("dataset.source = csv", "dataset.path"),
    ("stream.per_step = 100\nstream.test_count = 100", "stream.test_count"),
    ("no equals sign", "c.txt:1"),
])
def test_invalid_configs_name_the_field(tmp_path, text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path / "c.txt", text))
    assert key in str(err.value)


def test_config_error_exit_code(tmp_path):
    assert main(["run", str(_write(tmp_path / "c.txt", "pseudo.lookback = -1"))]) == cli.EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.txt")]) == cli.EXIT_CONFIG


def test_single_cell_writes_one_result(tmp_path):
    cfg_path = _write(tmp_path / "c.txt", TINY + f"run.methods = st\nrun.seeds = 0\nrun.output = {tmp_path / 'out'}\n")
    assert main(["run", str(cfg_path)]) == 0
    root = tmp_path / "out" / "ug_2c_2d"
    assert sorted(p.name for p in (root / "st" / "seed0").iterdir()) == ["R.csv", "model.bin", "summary.txt"]
    assert len(list(root.rglob("R.csv"))) == 1
    summary = read_summary(root / "st" / "seed0" / "summary.txt")
    assert {"run_id", "dataset", "method", "seed", "acc_t", "acc_T"} <= set(summary)
    r = AccMatrix.read_csv(root / "st" / "seed0" / "R.csv")
    assert r.steps == 3 and float(summary["acc_T"]) == pytest.approx(np.mean(r.final_row()), abs=1e-15)
    assert load_checkpoint(root / "st" / "seed0" / "model.bin").dims == (2, 64, 64, 2)


def test_seed_grid_aggregates_and_probes(tmp_path):
    text = TINY + f"run.methods = st, ours\nrun.seeds = 0, 1, 2, 3, 4\nrun.probe_bounds = 0, 0.1\n" \
                  f"run.probe_draws = 3\nrun.output = {tmp_path / 'out'}\n"
    cfg = parse_config(_write(tmp_path / "c.txt", text))
    assert run_experiment(cfg) == 0
    root = tmp_path / "out" / "ug_2c_2d"
    rows = (root / "summary.csv").read_text().splitlines()
    assert rows[0].startswith("method,runs,acc_t_mean,acc_t_std,acc_T_mean,acc_T_std")
    ours = dict(zip(rows[0].split(","), rows[2].split(",")))
    assert ours["method"] == "ours" and ours["runs"] == "5"
    accs = [float(read_summary(root / "ours" / f"seed{k}" / "summary.txt")["acc_t"]) for k in range(5)]
    assert float(ours["acc_t_mean"]) == pytest.approx(np.mean(accs), abs=1e-12)
    assert float(ours["acc_t_std"]) == pytest.approx(np.std(accs, ddof=1), abs=1e-12)
    probe = (root / "ours" / "seed0" / "probe.csv").read_text().splitlines()
    assert probe[0] == "b,mean_acc,std_acc" and len(probe) == 3
    manifest = json.loads((root / "manifest.json").read_text())
    assert len(manifest["cells"]) == 10 and all(c["status"] == "ok" for c in manifest["cells"])
    assert "run.probe_draws = 3" in manifest["config"]
    for cell in manifest["cells"]:
        for artifact in cell["artifacts"]:
            assert (tmp_path / "out" / artifact).is_file()


def test_rerun_is_byte_identical_and_manifest_reruns_a_cell(tmp_path):
    text = TINY + f"run.methods = ours\nrun.seeds = 3\nrun.output = {tmp_path / 'out'}\n"
    cfg_path = _write(tmp_path / "c.txt", text)
    r_csv = tmp_path / "out" / "ug_2c_2d" / "ours" / "seed3" / "R.csv"
    assert main(["run", str(cfg_path)]) == 0
    first = r_csv.read_bytes()
    r_csv.unlink()
    manifest = tmp_path / "out" / "ug_2c_2d" / "manifest.json"
    assert main(["run", str(manifest), "--cell", "ours:3"]) == 0
    assert r_csv.read_bytes() == first


def test_failed_cell_is_recorded_and_others_proceed(tmp_path, monkeypatch):
    real = cli.run_method

    def flaky(name, *args, **kwargs):
        if name == "pl_conf":
            raise RuntimeError("boom")
        return real(name, *args, **kwargs)

    monkeypatch.setattr(cli, "run_method", flaky)
    text = TINY + f"run.methods = st, pl_conf\nrun.seeds = 0\nrun.output = {tmp_path / 'out'}\n"
    assert main(["run", str(_write(tmp_path / "c.txt", text))]) == cli.EXIT_PARTIAL
    cells = {c["method"]: c for c in json.loads((tmp_path / "out" / "ug_2c_2d" / "manifest.json").read_text())["cells"]}
    assert cells["st"]["status"] == "ok"
    assert cells["pl_conf"]["status"] == "failed" and "boom" in cells["pl_conf"]["error"]


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "elsewhere"))
    text = TINY + "run.methods = st\nrun.seeds = 0\nrun.output = ignored\n"
    assert main(["run", str(_write(tmp_path / "c.txt", text))]) == 0
    assert (tmp_path / "elsewhere" / "ug_2c_2d" / "st" / "seed0" / "R.csv").is_file()


def test_csv_dataset_runs(tmp_path):
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(-3, 1, (300, 2)), rng.normal(3, 1, (300, 2))])
    y = np.repeat([4, 9], 300)
    rows = "\n".join(f"{float(a)!r},{float(b)!r},{c}" for (a, b), c in zip(x, y))
    data = _write(tmp_path / "blobs.csv", "f0,f1,label\n" + rows + "\n")
    text = f"""dataset.source = csv
dataset.path = {data}
dataset.header = true
stream.per_step = 100
stream.test_count = 30
train.pretrain_epochs = 10
train.epochs = 3
run.methods = ours
run.seeds = 0
run.output = {tmp_path / 'out'}
"""
    assert main(["run", str(_write(tmp_path / "c.txt", text))]) == 0
    assert AccMatrix.read_csv(tmp_path / "out" / "blobs" / "ours" / "seed0" / "R.csv").steps == 5


def test_gen_stream_and_probe(tmp_path, capsys):
    spec = _write(tmp_path / "s.txt", "preset = ug_2c_2d\ninstances_per_step = 50\nsteps = 2\nseed = 4\n")
    assert main(["gen-stream", str(spec), str(tmp_path / "s")]) == 0
    stream = load_csv(tmp_path / "s" / "stream.csv")
    assert stream.x.shape == (150, 2)
    assert len(load_csv(tmp_path / "s" / "step002_test.csv")) == 15

    text = TINY + f"run.methods = st\nrun.seeds = 0\nrun.output = {tmp_path / 'out'}\n"
    assert main(["run", str(_write(tmp_path / "c.txt", text))]) == 0
    ckpt = tmp_path / "out" / "ug_2c_2d" / "st" / "seed0" / "model.bin"
    capsys.readouterr()
    assert main(["probe", str(ckpt), str(tmp_path / "s" / "step001_test.csv"), "--bounds", "0,0.1",
                 "--draws", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "b,mean_acc,std_acc" and out[1].startswith("0.0,") and out[1].endswith(",0.0")


def test_explicit_stream_spec(tmp_path):
    spec = parse_stream_spec(_write(tmp_path / "s.txt", "shape = 2, 1, 2\nstart_means = -3, 0, 3, 0\n"
                                                         "velocities = 0, 0.2, 0, -0.2\nsteps = 4\n"))
    np.testing.assert_array_equal(spec.means_at(4)[:, 0], [[-3.0, 0.8], [3.0, -0.8]])
    with pytest.raises(ConfigError, match="velocities"):
        parse_stream_spec(_write(tmp_path / "b.txt", "shape = 2, 1, 2\nstart_means = 0,0,0,0\nvelocities = 1\n"))
    with pytest.raises(ConfigError, match="colour"):
        parse_stream_spec(_write(tmp_path / "c.txt", "colour = red\n"))


def test_keys_listing(capsys):
    assert main(["keys"]) == 0
    out = capsys.readouterr().out
    assert "pseudo.lookback = 100" in out and "replay.eta1 = 0.01" in out
