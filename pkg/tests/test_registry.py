import json

import pytest
from mock import patch
from sqlalchemy.orm.exc import NoResultFound

from liqpde.db.models import ExperimentRun
from liqpde.exceptions import RunNotFound
from liqpde.registry import delete_run, get_run, list_runs, record_run, session_scope


@pytest.fixture
def manifest():
    return {
        "experiment": "certificate",
        "config_sha256": "ab" * 32,
        "seed": 20240101,
        "passed": True,
        "artifacts": ["certificate.csv", "picard.csv"],
        "details": {"delta": 0.125},
    }


def test_record_run(manifest):
    with patch("sqlalchemy.orm.Session") as mock_session:
        mock_session.add.return_value = None
        run = record_run(mock_session, manifest, artifact_dir="out/certificate")
        mock_session.add.assert_called_once_with(run)
        assert run.experiment == "certificate"
        assert run.passed is True
        assert run.details == {"delta": 0.125}
        assert json.loads(run.manifest)["seed"] == 20240101


def test_get_missing_run():
    with patch("sqlalchemy.orm.Session") as mock_session:
        mock_session.query(ExperimentRun).filter().one.side_effect = NoResultFound()
        with pytest.raises(RunNotFound):
            get_run(mock_session, 1)


def test_delete_missing_run():
    with patch("sqlalchemy.orm.Session") as mock_session:
        mock_session.query(ExperimentRun).where().one.side_effect = NoResultFound()
        with pytest.raises(RunNotFound):
            delete_run(mock_session, 1)


def test_delete_run(manifest):
    run = ExperimentRun(experiment="certificate", config_hash="ab" * 32, passed=True)
    with patch("sqlalchemy.orm.Session") as mock_session:
        mock_session.query(ExperimentRun).where().one.return_value = run
        assert delete_run(mock_session, 1) is run
        mock_session.delete.assert_called_once_with(run)


def test_registry_round_trip(manifest, tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    with session_scope(url) as session:
        record_run(session, manifest, n_paths=10)
        record_run(session, dict(manifest, experiment="simulate", passed=False))
    with session_scope(url) as session:
        runs = list_runs(session)
        assert [run.experiment for run in runs] == ["certificate", "simulate"]
        assert [run.passed for run in list_runs(session, "simulate")] == [False]
        assert get_run(session, runs[0].id).n_paths == 10
        assert "certificate passed" in repr(runs[0])


def test_session_rolls_back(manifest, tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    with pytest.raises(RuntimeError):
        with session_scope(url) as session:
            record_run(session, manifest)
            raise RuntimeError("interrupted")
    with session_scope(url) as session:
        assert list_runs(session) == []


def test_run_from_manifest(manifest):
    run = ExperimentRun.from_manifest(dict(manifest, passed=False), "out/certificate", 50)
    assert (run.experiment, run.config_hash, run.seed) == ("certificate", "ab" * 32, 20240101)
    assert (run.passed, run.n_paths, run.artifact_dir) == (False, 50, "out/certificate")
    assert run.details == {"delta": 0.125}


def test_run_from_manifest_requires_hash(manifest):
    del manifest["config_sha256"]
    with pytest.raises(KeyError):
        ExperimentRun.from_manifest(manifest)
