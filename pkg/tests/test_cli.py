import pytest
from mock import patch

from liqpde.cli import build_parser, main
from tests.test_controller import CONFIG


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "coth.toml"
    path.write_text(CONFIG)
    return path


def test_parser_overrides():
    argv = ["simulate", "demo.toml", "--seed", "3", "--paths", "100", "--grid-nt", "50"]
    args = build_parser().parse_args(argv)
    assert args.command == "simulate"
    assert (args.seed, args.paths, args.grid_nt, args.grid_ny) == (3, 100, 50, None)


def test_parser_requires_command():
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args([])
    assert e.value.code == 2


def test_run_forwards_overrides(config_path, tmp_path):
    with patch("liqpde.cli.controller.run", return_value=0) as run:
        argv = ["run", str(config_path), "solve", "certificate", "--seed", "5", "--out-dir", str(tmp_path)]
        assert main(argv) == 0
    args, kwargs = run.call_args
    assert args == (config_path, ["solve", "certificate"])
    assert kwargs["seed"] == 5
    assert kwargs["out_dir"] == tmp_path
    assert kwargs["registry_url"] is None


def test_single_experiment_command(config_path, tmp_path):
    assert main(["certificate", str(config_path), "--out-dir", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "certificate" / "certificate.csv").exists()


def test_unknown_experiment_exit_code(config_path):
    assert main(["run", str(config_path), "calibrate"]) == 2


def test_missing_config_exit_code(tmp_path):
    assert main(["solve", str(tmp_path / "missing.toml")]) == 2


def test_list_runs(config_path, tmp_path, capsys):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    assert main(["certificate", str(config_path), "--registry", url, "--out-dir", str(tmp_path / "out")]) == 0
    capsys.readouterr()
    assert main(["runs", "--registry", url]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    assert "\tcertificate\tpass\t" in lines[0]
    assert main(["runs", "--registry", url, "--experiment", "simulate"]) == 0
    assert capsys.readouterr().out == ""
