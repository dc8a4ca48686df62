# Copyright (c) 2026 liqpde developers
# MIT License

import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

from sqlalchemy import create_engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.orm.exc import NoResultFound

from liqpde import settings
from liqpde.db.models import Base, ExperimentRun
from liqpde.exceptions import RunNotFound

logger = logging.getLogger(__name__)


@contextmanager
def session_scope(url: Optional[str] = None) -> Iterator[Session]:
    """
    Session bound to the registry database; commits on success, rolls back on error.
    """
    engine = create_engine(url or settings.REGISTRY_URL)
    Base.metadata.create_all(engine)
    session = sessionmaker(bind=engine)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
        engine.dispose()


def record_run(
    session: Session,
    manifest: Dict[str, Any],
    artifact_dir: Optional[str] = None,
    n_paths: Optional[int] = None,
) -> ExperimentRun:
    """
    Add a run entry for a written manifest.
    """
    run = ExperimentRun.from_manifest(manifest, artifact_dir, n_paths)
    session.add(run)
    logger.debug("Recorded %s run for config %s", run.experiment, run.config_hash[:12])
    return run


def get_run(session: Session, run_id: int) -> ExperimentRun:
    try:
        return session.query(ExperimentRun).filter(ExperimentRun.id == run_id).one()
    except NoResultFound as e:
        raise RunNotFound(f"No run with id {run_id}") from e


def list_runs(session: Session, experiment: Optional[str] = None) -> List[ExperimentRun]:
    query = session.query(ExperimentRun)
    if experiment is not None:
        query = query.filter(ExperimentRun.experiment == experiment)
    return query.order_by(ExperimentRun.id).all()


def delete_run(session: Session, run_id: int) -> ExperimentRun:
    try:
        run = session.query(ExperimentRun).where(ExperimentRun.id == run_id).one()
        session.delete(run)
        return run
    except NoResultFound as e:
        raise RunNotFound(f"No run with id {run_id}") from e
