import json

import pytest

from sgmopt.cli import EXIT_CONFIG, EXIT_OK, main, read_config_file
from sgmopt.errors import ConfigError


def test_run_ex1(tmp_path, capsys):
    assert main(["run", "--experiment", "ex1", "--out", str(tmp_path)]) == EXIT_OK
    assert "SGM" in capsys.readouterr().out
    assert (tmp_path / "ex1_SGM_trace.csv").exists()


def test_run_single_method_csv_only(tmp_path):
    code = main(["run", "--experiment", "ex3", "--n", "16", "--method", "SGM", "--format", "csv",
                 "--no-diagnostics", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "ex3_SGM_trace.csv").exists()
    assert not (tmp_path / "ex3_SGM_trace.json").exists()
    assert not (tmp_path / "ex3_YWH_trace.csv").exists()


def test_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("SGMOPT_OUT", str(tmp_path))
    assert main(["run", "--experiment", "ex1", "--method", "ZH"]) == EXIT_OK
    assert (tmp_path / "ex1_ZH_trace.json").exists()


@pytest.mark.parametrize("argv", [
    ["run", "--experiment", "ex1", "--bogus"],
    ["run", "--experiment", "ex9"],
    ["run"],
    ["run", "--experiment", "ex1", "--delta1", "0.7"],
    ["run", "--experiment", "ex1", "--format", "xml"],
    ["frobnicate"],
])
def test_config_errors(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] == "run" else argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_missing_out_dir(tmp_path):
    assert main(["run", "--experiment", "ex1", "--out", str(tmp_path / "missing")]) == EXIT_CONFIG
    assert main(["verify", "--out", str(tmp_path / "missing")]) == EXIT_CONFIG


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"experiment = ex3\nn = 8\nmethod = SGM  # one method\nmax-iters = 3\nout = {tmp_path}\n")
    assert main(["run", "--config", str(cfg), "--max-iters", "5"]) == EXIT_OK
    data = json.loads((tmp_path / "ex3_SGM_trace.json").read_text())
    assert data["config"]["max_iters"] == 5
    assert data["config"]["n"] == 8


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = ex1\ncolour = blue\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err


def test_config_file_bad_lines(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment ex1\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)
    cfg.write_text("x0_ones = maybe\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "absent.cfg")


def test_overrides_echoed(tmp_path):
    assert main(["run", "--experiment", "ex1", "--method", "SGM", "--beta", "0.6", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "ex1_SGM_trace.json").read_text())
    assert data["config"]["overrides"] == {"beta": 0.6}


def test_f_star_override(tmp_path):
    assert main(["run", "--experiment", "ex1", "--method", "SGM", "--f-star", "-0.1", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "ex1_SGM_trace.json").read_text())
    assert data["config"]["f_star_source"] == "user supplied"


def test_plot_data(tmp_path, capsys):
    assert main(["run", "--experiment", "ex1", "--out", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    traces = [str(tmp_path / f"ex1_{m}_trace.json") for m in ("SGM", "ZH")]
    assert main(["plot-data", *traces, "--f-star", "-0.158368", "--out", str(tmp_path), "--prefix", "fig"]) == 0
    assert (tmp_path / "fig_SGM_series.csv").exists()
    assert main(["plot-data", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
