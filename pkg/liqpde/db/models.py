# Copyright (c) 2026 liqpde developers
# MIT License

import datetime as dt
import json
import logging
from typing import Any, Dict, Optional

import pytz
import sqlalchemy as sa
from sqlalchemy.orm import declarative_base

logger = logging.getLogger(__name__)

Base: Any = declarative_base()


def utcnow() -> dt.datetime:
    return dt.datetime.now(pytz.utc)


class ExperimentRun(Base):
    """One executed experiment with the manifest it wrote."""

    __tablename__ = "liqpde_experiment_run"

    id = sa.Column(sa.Integer, primary_key=True, autoincrement=True)
    experiment = sa.Column(sa.String(64), nullable=False)
    config_hash = sa.Column(sa.String(64), nullable=False)
    seed = sa.Column(sa.BigInteger)
    n_paths = sa.Column(sa.Integer)
    passed = sa.Column(sa.Boolean, nullable=False, default=False)
    artifact_dir = sa.Column(sa.String(1024))
    created_at = sa.Column(sa.DateTime(timezone=True), nullable=False, default=utcnow)
    manifest = sa.Column(sa.Text(), default="{}")

    @classmethod
    def from_manifest(
        cls, manifest: Dict[str, Any], artifact_dir: Optional[str] = None, n_paths: Optional[int] = None
    ) -> "ExperimentRun":
        return cls(
            experiment=manifest["experiment"],
            config_hash=manifest["config_sha256"],
            seed=manifest.get("seed"),
            n_paths=n_paths,
            passed=bool(manifest.get("passed", False)),
            artifact_dir=artifact_dir,
            manifest=json.dumps(manifest, sort_keys=True, default=float),
        )

    @property
    def details(self) -> Dict[str, Any]:
        return json.loads(str(self.manifest or "{}")).get("details", {})

    def __repr__(self) -> str:
        status = "passed" if self.passed else "failed"
        return f"<ExperimentRun {self.id} {self.experiment} {status}>"
