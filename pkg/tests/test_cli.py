"""Command-line pipeline checks on a miniature corpus."""

import json

import numpy as np
import pytest

from beamvista.cli import main
from beamvista.dataset import Dataset


OVERLAY = """
[trajectories]
count = 2
total_samples = 20

[train]
epochs = 1
batch_size = 8
dtype = "float32"

[prune]
finetune_epochs = 0

[eval]
fractions = [0.5, 1.0]
num_ranges = 2

[bench]
batch_sizes = [1, 2]
trials = 30
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.toml"
    cfg.write_text(OVERLAY)
    return root, cfg


@pytest.fixture(scope="module")
def generated(workdir):
    root, cfg = workdir
    out = root / "tiny.vwdr"
    rc = main(["generate", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def trained(workdir, generated):
    root, cfg = workdir
    model = root / "tiny.vwnn"
    rc = main(["train", "--config", str(cfg), "--data", str(generated),
               "--out", str(model)])
    assert rc == 0
    return model


class TestGenerate:
    def test_dataset_written(self, generated):
        ds = Dataset.load(generated)
        assert len(ds) > 0
        assert ds.manifest["num_beams"] == 64

    def test_output_dir_must_exist(self, workdir):
        root, cfg = workdir
        rc = main(["generate", "--config", str(cfg),
                   "--out", str(root / "no" / "such" / "dir" / "d.vwdr")])
        assert rc == 5


class TestTrain:
    def test_model_and_history(self, workdir, trained):
        from beamvista.nn import load_model
        net = load_model(trained)
        assert net.input_mean is not None
        history = trained.with_suffix(".history.csv")
        assert history.exists()
        assert history.read_text().splitlines()[0].startswith("epoch")

    def test_missing_dataset_is_data_error(self, workdir):
        root, cfg = workdir
        rc = main(["train", "--config", str(cfg),
                   "--data", str(root / "absent.vwdr"),
                   "--out", str(root / "m.vwnn")])
        assert rc == 3

    def test_bad_fraction_rejected(self, workdir, generated):
        root, cfg = workdir
        rc = main(["train", "--config", str(cfg), "--data", str(generated),
                   "--out", str(root / "m2.vwnn"), "--fraction", "2.0"])
        assert rc == 2


class TestEval:
    def test_reports_written(self, workdir, generated, trained):
        root, cfg = workdir
        out = root / "report"
        out.mkdir()
        rc = main(["eval", "--config", str(cfg), "--data", str(generated),
                   "--model", str(trained), "--out-dir", str(out),
                   "--split", "all"])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["split"] == "all"
        assert report["count"] > 0
        assert "combined" in report["scenarios"]
        counts = [s["count"] for s in report["scenarios"].values()]
        assert report["scenarios"]["combined"]["count"] == report["count"]
        assert sum(counts) == 2 * report["count"]
        for name in ("topk.csv", "confusion.csv", "ranges.csv"):
            assert (out / name).exists()


class TestPruneBenchSweep:
    def test_prune_writes_model_and_table(self, workdir, generated, trained):
        root, cfg = workdir
        out = root / "pruned.vwnn"
        rc = main(["prune", "--config", str(cfg), "--data", str(generated),
                   "--model", str(trained), "--out", str(out),
                   "--ratio", "0.5"])
        assert rc == 0
        from beamvista.nn import load_model
        from beamvista.nn import count_flops
        base, pruned = load_model(trained), load_model(out)
        assert count_flops(pruned) < count_flops(base)
        table = out.with_suffix(".pruning.csv")
        assert table.exists()
        lines = table.read_text().splitlines()
        assert len(lines) == 3  # header + baseline + pruned

    def test_bench_json(self, workdir, trained):
        root, cfg = workdir
        out = root / "bench.json"
        rc = main(["bench", "--config", str(cfg), "--model", str(trained),
                   "--out", str(out)])
        assert rc == 0
        res = json.loads(out.read_text())
        assert res["trials"] == 30
        assert set(res["batches"]) == {"1", "2"}
        assert res["backend"] in ("numba", "numpy")

    def test_sweep_csv(self, workdir, generated):
        root, cfg = workdir
        out = root / "sweep.csv"
        rc = main(["sweep", "--config", str(cfg), "--data", str(generated),
                   "--out", str(out), "--fractions", "0.5", "1.0"])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "fraction,num_train,top1,top2,top3"
        assert len(lines) == 3


class TestArgHandling:
    def test_deterministic_requires_seed(self, workdir):
        root, cfg = workdir
        rc = main(["generate", "--config", str(cfg), "--deterministic",
                   "--out", str(root / "x.vwdr")])
        assert rc == 2

    def test_unknown_config_section(self, workdir, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[mystery]\nx = 1\n")
        rc = main(["generate", "--config", str(bad),
                   "--out", str(tmp_path / "x.vwdr")])
        assert rc == 2

    def test_seed_overrides_config(self, workdir, tmp_path):
        root, cfg = workdir
        a = tmp_path / "a.vwdr"
        b = tmp_path / "b.vwdr"
        for path in (a, b):
            rc = main(["generate", "--config", str(cfg), "--seed", "5",
                       "--deterministic", "--out", str(path)])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()
