"""Command line: config validation, artifacts, exit codes, determinism."""

import json

import pytest
from click.testing import CliRunner

from sceneryflow.cli import main as cli_main
from sceneryflow.config import ConfigError, load_system


@pytest.fixture
def runner():
    return CliRunner()


# -- config loading ----------------------------------------------------------------


def test_bundled_configs_load():
    for name in ("strong-separation", "dyadic", "golden"):
        system = load_system(name)
        assert system.m == 2
        assert float(system.hull_hi[0]) == pytest.approx(0.75)


def test_config_rejects_floats(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(
        "field: {minpoly: [0, 1]}\ndim: 1\n"
        "maps:\n - {ratio: 0.5, translation: ['0']}\n"
        " - {ratio: '1/2', translation: ['1/2']}\n"
        "probs: ['1/2', '1/2']\n")
    with pytest.raises(ConfigError, match="exact rational"):
        load_system(bad)


def test_config_missing_key(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("dim: 1\nmaps: []\nprobs: []\n")
    with pytest.raises(ConfigError, match="field"):
        load_system(bad)


def test_config_bad_probs(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(
        "field: {minpoly: [0, 1]}\ndim: 1\n"
        "maps:\n - {ratio: '1/2', translation: ['0']}\n"
        " - {ratio: '1/2', translation: ['1/2']}\n"
        "probs: ['1/2', '1/3']\n")
    with pytest.raises(ConfigError, match="sum"):
        load_system(bad)


def test_unknown_bundled_name():
    with pytest.raises(ConfigError, match="bundled"):
        load_system("unknown-system")


# -- subcommands --------------------------------------------------------------------


def test_validate_exit_codes(runner, tmp_path):
    ok = runner.invoke(cli_main, ["validate", "--config", "dyadic"])
    assert ok.exit_code == 0
    assert "ratio=0.5" in ok.output

    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense: [\n")
    err = runner.invoke(cli_main, ["validate", "--config", str(bad)])
    assert err.exit_code == 2


def test_wsc_report_artifacts(runner, tmp_path):
    out = tmp_path / "wsc"
    result = runner.invoke(cli_main, ["wsc-report", "--config", "strong-separation",
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "wsc_states.csv").exists()
    assert (out / "manifest.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "wsc_states.csv" in manifest["artifacts"]
    assert manifest["tool_version"]


def test_wsc_report_budget_exit(runner, tmp_path):
    result = runner.invoke(cli_main, ["wsc-report", "--config", "golden",
                                      "--out", str(tmp_path / "b"),
                                      "--max-states", "2"])
    assert result.exit_code == 3


def test_find_a0(runner, tmp_path):
    result = runner.invoke(cli_main, ["find-a0", "--config", "dyadic",
                                      "--out", str(tmp_path / "a0")])
    assert result.exit_code == 0
    assert "a0=2.1" in result.output


def test_b0_cert_roundtrip(runner, tmp_path):
    out = tmp_path / "cert"
    result = runner.invoke(cli_main, ["b0-cert", "--config", "golden",
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    cert_file = out / "b0_certificate.json"
    assert cert_file.exists()
    again = runner.invoke(cli_main, ["b0-cert", "--config", "golden",
                                     "--out", str(tmp_path / "cert2"),
                                     "--verify-file", str(cert_file)])
    assert again.exit_code == 0, again.output
    assert "recheck=ok" in again.output


def test_weights_command(runner, tmp_path):
    out = tmp_path / "w"
    result = runner.invoke(cli_main, ["weights", "--config", "golden",
                                      "--word", "1.2.2", "--out", str(out)])
    assert result.exit_code == 0
    text = (out / "weights.csv").read_text()
    assert "1/4" in text  # merged exact-overlap identity weight


def test_nu_build(runner, tmp_path):
    out = tmp_path / "nu"
    result = runner.invoke(cli_main, ["nu-build", "--config", "dyadic",
                                      "--out", str(out), "--depth", "8"])
    assert result.exit_code == 0
    assert (out / "nu_measure.txt").exists()


def test_scenery_command(runner, tmp_path):
    out = tmp_path / "sc"
    result = runner.invoke(cli_main, ["scenery", "--config", "dyadic",
                                      "--out", str(out), "--t-max", "3",
                                      "--seed", "3"])
    assert result.exit_code == 0, result.output
    lines = (out / "scenery_frames.csv").read_text().strip().splitlines()
    assert len(lines) > 10


def test_return_times_command(runner, tmp_path):
    out = tmp_path / "rt"
    result = runner.invoke(cli_main, ["return-times", "--config", "dyadic",
                                      "--out", str(out), "--length", "5000"])
    assert result.exit_code == 0, result.output
    assert (out / "return_times.csv").exists()


def test_normality_command(runner, tmp_path):
    out = tmp_path / "nm"
    result = runner.invoke(cli_main, ["normality", "--config", "golden",
                                      "--out", str(out), "--horizon", "256",
                                      "--samples", "2", "--freqs", "2"])
    assert result.exit_code == 0, result.output
    assert (out / "weyl.csv").exists()
    hyp = json.loads((out / "hypothesis.json").read_text())
    assert hyp["pisot"] is True


def test_converge_command_with_plot(runner, tmp_path):
    out = tmp_path / "cv"
    result = runner.invoke(cli_main, ["converge", "--config", "dyadic",
                                      "--out", str(out), "--points", "2",
                                      "--t-list", "1.4,2.8", "--plot"])
    assert result.exit_code == 0, result.output
    assert (out / "convergence.csv").exists()
    assert (out / "convergence.png").exists()


def test_tangent_dist_command(runner, tmp_path):
    out = tmp_path / "td"
    result = runner.invoke(cli_main, ["tangent-dist", "--config", "dyadic",
                                      "--out", str(out), "--points", "2",
                                      "--t-max", "3"])
    assert result.exit_code == 0, result.output
    assert (out / "tangent_distances.csv").exists()


def test_csv_rows_reference_manifest(runner, tmp_path):
    out = tmp_path / "ref"
    runner.invoke(cli_main, ["wsc-report", "--config", "dyadic", "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    header, first = (out / "wsc_states.csv").read_text().splitlines()[:2]
    assert header.startswith("run_id")
    assert first.startswith(manifest["run_id"])
