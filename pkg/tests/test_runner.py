"""End-to-end CLI runs: exit codes, artifacts, byte-level reproducibility."""

import json
import os

import pytest

from freebench.runner import main, run


@pytest.fixture
def tiny_config(tmp_path):
    cfg = {
        "experiment": "tiny-free-pair",
        "seed": 20260810,
        "oracle": {
            "factors": [
                {"label": 1, "law": {"type": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]}},
                {"label": 2, "law": {"type": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]}},
            ]
        },
        "model": {
            "factor1": {"type": "quantile_diagonal", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
            "factor2": {"type": "quantile_diagonal", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
        },
        "schedule": {"k_list": [16, 32, 64], "samples": 50},
        "polynomials": ["f1.g0 f2.g0", "f1.g0^2 - 1"],
        "tolerances": {"moment_abs": 0.2, "eap": 0.2, "collapse": 0.2},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def test_verify_run_passes(tiny_config, tmp_path):
    path, _ = tiny_config
    out = tmp_path / "run1"
    code = run("verify", str(path), out=str(out))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["all_passed"] is True
    assert (out / "report.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert "report.csv" in manifest["files"]
    assert not (out / ".lock").exists()


def test_oracle_run(tiny_config, tmp_path):
    path, _ = tiny_config
    out = tmp_path / "oracle_out"
    assert run("oracle", str(path), out=str(out)) == 0
    moments = (out / "moments.csv").read_text().strip().split("\n")
    assert moments[0] == "poly,re,im"
    # tau(xy) = 0 for two centered factors
    row = dict(line.split(",", 1) for line in moments[1:])
    assert float(row["f1.g0 f2.g0"].split(",")[0]) == pytest.approx(0.0, abs=1e-12)


def test_cover_run(tiny_config, tmp_path):
    path, _ = tiny_config
    out = tmp_path / "cover_out"
    assert run("cover", str(path), out=str(out)) == 0
    lines = (out / "cover.csv").read_text().strip().split("\n")
    assert lines[0].startswith("n,F,eps,lower,upper")
    assert len(lines) > 1


def test_sample_run_persists_tuples(tiny_config, tmp_path):
    from freebench.ncpoly import read_tuple

    path, _ = tiny_config
    out = tmp_path / "samples_out"
    assert run("sample", str(path), out=str(out)) == 0
    files = sorted((out / "samples").iterdir())
    assert files
    mt = read_tuple(files[0])
    assert mt.dim >= 16


def test_reports_byte_identical(tiny_config, tmp_path):
    path, _ = tiny_config
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run("verify", str(path), out=str(out1)) == 0
    assert run("verify", str(path), out=str(out2)) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()


def test_seed_override_changes_report(tiny_config, tmp_path):
    path, _ = tiny_config
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run("verify", str(path), out=str(out1)) == 0
    assert run("verify", str(path), out=str(out2), seed=77) == 0
    assert (out1 / "report.json").read_bytes() != (out2 / "report.json").read_bytes()


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = {
        "experiment": "bad",
        "seed": 1,
        "oracle": {
            "factors": [
                {"label": 1, "law": {"type": "discrete", "atoms": [[1.0, 0.9]]}}
            ]
        },
        "model": {
            "factor1": {"type": "quantile_diagonal", "atoms": [[1.0, 1.0]]},
            "factor2": {"type": "quantile_diagonal", "atoms": [[1.0, 1.0]]},
        },
        "schedule": {"k_list": [8], "samples": 4},
        "polynomials": ["f1.g0"],
        "output_dir": str(tmp_path / "x"),
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert run("verify", str(path)) == 2
    err = capsys.readouterr().err
    assert "atoms" in err  # the error names the offending field

    assert run("verify", str(tmp_path / "missing.json")) == 2


def test_locked_output_dir(tiny_config, tmp_path):
    path, _ = tiny_config
    out = tmp_path / "locked"
    os.makedirs(out)
    (out / ".lock").write_text("")
    assert run("verify", str(path), out=str(out)) == 3


def test_cli_main(tiny_config, tmp_path):
    path, _ = tiny_config
    out = tmp_path / "cli_out"
    code = main(["oracle", "--config", str(path), "--out", str(out)])
    assert code == 0
