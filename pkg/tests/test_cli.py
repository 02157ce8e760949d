import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_recording
from tremorid.cli import main
from tremorid.features import read_feature_csv
from tremorid.pipeline import PipelineConfig
from tremorid.signal_io import write_recording


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run("synth", "--out", out / "data", "--subjects", 5, "--sessions", 3, "--seed", 7,
               "--duration", 10) == 0
    return out


def test_synth_layout(synth_dir):
    files = sorted(p.name for p in (synth_dir / "data" / "S01").iterdir())
    assert len(files) == 6 and files[0].endswith("_acc.csv")
    profiles = json.loads((synth_dir / "data" / "profiles.json").read_text())
    assert [p["subject"] for p in profiles] == ["S01", "S02", "S03", "S04", "S05"]
    assert json.loads((synth_dir / "data" / "synth.config.json").read_text())["seed"] == 7


@pytest.fixture(scope="module")
def trained(synth_dir):
    d = synth_dir
    assert run("extract", "--data", d / "data", "--out", d / "f.csv") == 0
    assert run("train", "--features", d / "f.csv", "--model", d / "m.json") == 0
    assert run("evaluate", "--features", d / "f.csv", "--model", d / "m.json",
               "--report", d / "r.json", "--csv", d / "r.csv") == 0
    return d


def test_synth_train_evaluate_smoke(trained):
    report = json.loads((trained / "r.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    assert report["config"]["forest"]["n_trees"] == 130
    for path in ("f.csv", "m.json", "r.json"):
        assert (trained / f"{path}.config.json").exists()
    assert (trained / "r.csv").read_text().startswith("label,n_genuine,fnmr,fmr")


def test_runs_are_byte_identical(synth_dir, tmp_path):
    outs = []
    for i, jobs in enumerate((1, 2)):
        o = tmp_path / f"run{i}"
        assert run("extract", "--data", synth_dir / "data", "--out", o / "f.csv", "--jobs", jobs) == 0
        assert run("train", "--features", o / "f.csv", "--model", o / "m.json", "--n-trees", 12,
                   "--jobs", jobs) == 0
        assert run("evaluate", "--features", o / "f.csv", "--model", o / "m.json",
                   "--report", o / "r.json", "--n-trees", 12) == 0
        outs.append(o)
    for name in ("f.csv", "m.json", "r.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_identify_prints_label_and_votes(trained, capsys):
    d = trained
    acc = next((d / "data" / "S03").glob("*_s3_acc.csv"))
    gyro = next((d / "data" / "S03").glob("*_s3_gyro.csv"))
    capsys.readouterr()
    assert run("identify", "--model", d / "m.json", "--acc", acc, "--gyro", gyro,
               "--out", d / "id.json") == 0
    out = capsys.readouterr().out
    assert out.startswith("predicted subject: ")
    result = json.loads((d / "id.json").read_text())
    assert sum(result["votes"].values()) == 130 * result["n_windows"]
    assert run("verify", "--model", d / "m.json", "--acc", acc, "--gyro", gyro,
               "--claim", result["predicted"]) == 0
    assert capsys.readouterr().out.startswith("ACCEPT")
    assert run("verify", "--model", d / "m.json", "--features", d / "f.csv", "--out", d / "v.json") == 0
    assert 0 <= json.loads((d / "v.json").read_text())["accuracy"] <= 1


def test_extract_all_zero_window(tmp_path):
    zeros = np.zeros(121)  # 1.2 s -> one window after trimming
    write_recording(make_recording(zeros), tmp_path / "acc.csv")
    write_recording(make_recording(zeros, sensor="gyroscope"), tmp_path / "gyro.csv")
    assert run("extract", "--acc", tmp_path / "acc.csv", "--gyro", tmp_path / "gyro.csv",
               "--out", tmp_path / "f.csv") == 0
    (vec,) = read_feature_csv(tmp_path / "f.csv")
    assert vec.values.shape == (176,) and not vec.values.any()


def test_rank_features_on_frequency_only_subjects(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "d", "--subjects", 6, "--sessions", 2, "--duration", 15,
               "--frequency-only") == 0
    assert run("extract", "--data", tmp_path / "d", "--out", tmp_path / "f.csv") == 0
    assert run("train", "--features", tmp_path / "f.csv", "--model", tmp_path / "m.json", "--all",
               "--n-trees", 40) == 0
    capsys.readouterr()
    assert run("rank-features", "--model", tmp_path / "m.json", "--top", 5,
               "--out", tmp_path / "rank.csv") == 0
    lines = (tmp_path / "rank.csv").read_text().splitlines()
    assert lines[0] == "rank,feature,split_count" and len(lines) == 6
    assert any("_psd_" in line for line in lines[1:])
    assert capsys.readouterr().out.splitlines() == lines[1:]


def test_filter_and_band_energy_commands(synth_dir, tmp_path, capsys):
    rec = next((synth_dir / "data" / "S02").glob("*_acc.csv"))
    assert run("filter", "--input", rec, "--out-dir", tmp_path, "--axes", "x") == 0
    lines = (tmp_path / f"{rec.stem}_x.csv").read_text().splitlines()
    assert lines[0] == "k,input,tremor,voluntary,residual,omega0" and len(lines) == 981
    assert run("band-energy", "--data", synth_dir / "data", "--bands", "4-7", "0-50",
               "--out", tmp_path / "be.json") == 0
    result = json.loads((tmp_path / "be.json").read_text())
    assert result["0-50"] == pytest.approx(1.0) and 0 <= result["4-7"] <= 1


def test_sweep_command(synth_dir, tmp_path):
    assert run("sweep", "--data", synth_dir / "data", "--parameter", "n_trees", "--values", 1, 5,
               "--out", tmp_path / "s.csv") == 0
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0].startswith("n_trees,") and len(rows) == 3


def test_config_file_and_flag_override(synth_dir, tmp_path, monkeypatch):
    cfg_path = tmp_path / "cfg.json"
    PipelineConfig().with_overrides(window_s=0.5, forest={"n_trees": 3}).save(cfg_path)
    out = tmp_path / "f.csv"
    assert run("extract", "--data", synth_dir / "data", "--out", out, "--config", cfg_path,
               "--overlap", 0.5) == 0
    echo = json.loads((tmp_path / "f.csv.config.json").read_text())
    assert echo["window_s"] == 0.5 and echo["overlap"] == 0.5 and echo["forest"]["n_trees"] == 3
    monkeypatch.setenv("TREMORID_CONFIG", str(cfg_path))
    assert run("train", "--features", out, "--model", tmp_path / "m.json") == 0
    assert json.loads((tmp_path / "m.json").read_text())["config"]["n_trees"] == 3


def test_pipeline_error_exit_code_and_message(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("# subject=S1;session=a;date=2016-03-01;device=d;sensor=accelerometer;rate_hz=100\n"
                   "0,1,1,1\n10,1,1,1\n10,1,1,1\n")
    assert run("filter", "--input", bad, "--out-dir", tmp_path) == 1
    err = capsys.readouterr().err
    assert err.startswith("tremorid.signal_io: ValidationError: timestamps strictly increasing")


def test_missing_file_is_pipeline_error(tmp_path, capsys):
    assert run("train", "--features", tmp_path / "none.csv", "--model", tmp_path / "m.json") == 1
    assert "FileNotFoundError" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["train", "--features", "f.csv"],
    ["extract", "--out", "f.csv"],
    ["synth", "--out", "d", "--overlap", "1.5"],
    ["band-energy", "--data", "d", "--bands", "four-seven"],
])
def test_usage_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tremorid", "rank-features"], capture_output=True, text=True)
    assert proc.returncode == 2 and "--model" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "tremorid", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("tremorid ")
