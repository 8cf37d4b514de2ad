import hashlib
import json
import os

import pytest

from koopman.cli import main
from koopman.config import default_config
from koopman.fileio import write_json


@pytest.fixture()
def small_config(tmp_path):
    cfg = default_config("pendulum").replace(n_trajectories=4, duration=1.0)
    path = tmp_path / "config.json"
    write_json(cfg.to_dict(), path)
    return str(path)


def _tree_digest(root):
    digest = hashlib.sha256()
    for base, _, names in sorted(os.walk(root)):
        for name in sorted(names):
            path = os.path.join(base, name)
            digest.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()


@pytest.mark.parametrize(
    "argv",
    [
        ["--help"],
        ["generate", "--help"],
        ["fit", "--help"],
        ["predict", "--help"],
        ["analyze", "--help"],
        ["ingest", "--help"],
        ["reproduce", "--help"],
        ["serve", "--help"],
    ],
)
def test_help_exits_zero(argv, capsys):
    assert main(argv) == 0
    assert "Usage" in capsys.readouterr().out


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "koopman" in capsys.readouterr().out


def test_unknown_option_is_usage_error(capsys):
    assert main(["generate", "--frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "frobnicate" in err
    assert "Usage" in err


def test_missing_config_file_named(capsys, tmp_path):
    missing = str(tmp_path / "absent.json")
    assert main(["generate", "--config", missing]) == 1
    assert "absent.json" in capsys.readouterr().err


def test_fit_requires_config(capsys):
    assert main(["fit"]) == 1
    assert "--config" in capsys.readouterr().err


def test_generate_writes_csv_set(tmp_path, small_config, capsys):
    out = str(tmp_path / "out")
    assert main(["generate", "--config", small_config, "--out", out]) == 0
    names = sorted(os.listdir(out))
    assert names == [
        "traj_000.csv", "traj_001.csv", "traj_002.csv", "traj_003.csv",
        "traj_manifest.json",
    ]
    first = (tmp_path / "out" / "traj_000.csv").read_text().splitlines()
    # the realized input sequence is always recorded, zero signal included
    assert first[0] == "t,x1,x2,u1"
    assert len(first) == 102  # header + 101 samples
    assert all(line.endswith(",0") for line in first[1:])


def test_generate_json_format(tmp_path, small_config):
    out = str(tmp_path / "out")
    assert main(["generate", "--config", small_config, "--out", out,
                 "--format", "json"]) == 0
    data = json.loads((tmp_path / "out" / "trajectories.json").read_text())
    assert len(data["trajectories"]) == 4


def test_fit_predict_analyze_pipeline(tmp_path, small_config, capsys):
    out = str(tmp_path / "work")
    assert main(["fit", "--config", small_config, "--out", out]) == 0
    model_path = os.path.join(out, "model.json")
    assert os.path.exists(model_path)
    echoed = capsys.readouterr().out
    assert "residual" in echoed

    assert main(["predict", "--model", model_path, "--x0", "2.748,0",
                 "--steps", "1000", "--out", out]) == 0
    for name in ("straight.csv", "corrected.csv"):
        lines = (tmp_path / "work" / name).read_text().splitlines()
        assert lines[0] == "t,x1,x2"
        assert len(lines) == 1002  # header + steps + 1

    assert main(["analyze", "--model", model_path, "--out", out]) == 0
    report = json.loads((tmp_path / "work" / "report.json").read_text())
    assert report["size"] == 6
    assert "stable" in capsys.readouterr().out


def test_predict_rejects_bad_x0(tmp_path, small_config, capsys):
    out = str(tmp_path / "work")
    main(["fit", "--config", small_config, "--out", out])
    model_path = os.path.join(out, "model.json")
    assert main(["predict", "--model", model_path, "--x0", "1,2,3",
                 "--steps", "5", "--out", out]) == 1
    assert main(["predict", "--model", model_path, "--x0", "abc",
                 "--steps", "5", "--out", out]) == 1


def test_ingest_command(tmp_path, capsys):
    src = tmp_path / "lab.csv"
    rows = ["t,angle"] + [f"{k * 0.01:.6f},{0.1 * k:.6f}" for k in range(60)]
    src.write_text("\n".join(rows) + "\n")
    out = str(tmp_path / "ingested")
    assert main(["ingest", str(src), "--angle-column", "angle", "--out", out]) == 0
    names = sorted(os.listdir(out))
    assert names == ["ingest_manifest.json", "ingested_000.csv"]
    manifest = json.loads((tmp_path / "ingested" / "ingest_manifest.json").read_text())
    assert manifest["files"][0]["velocity"] == "estimated"


def test_reproduce_unknown_target(capsys):
    assert main(["reproduce", "made_up"]) == 1
    assert "made_up" in capsys.readouterr().err


def test_reproduce_is_deterministic(tmp_path, capsys):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["reproduce", "golf_analysis", "--out", out_a]) == 0
    assert "[PASS]" in capsys.readouterr().out
    assert main(["reproduce", "golf_analysis", "--out", out_b]) == 0
    assert _tree_digest(out_a) == _tree_digest(out_b)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["passed"] is True
