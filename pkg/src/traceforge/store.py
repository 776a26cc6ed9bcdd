"""On-disk project layout: project.json, events.log, and baselines/."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from traceforge.errors import DuplicateNameError, NotFoundError, StorageFailureError, ValidationError

_PROJECT_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass(frozen=True)
class ProjectStore:
    name: str
    root: Path

    @property
    def project_json(self) -> Path:
        return self.root / "project.json"

    @property
    def events_log(self) -> Path:
        return self.root / "events.log"

    @property
    def baselines_dir(self) -> Path:
        return self.root / "baselines"

    @classmethod
    def create(cls, home: Path, name: str, created: str) -> "ProjectStore":
        if not _PROJECT_NAME_RE.match(name):
            raise ValidationError(f"bad project name {name!r}")
        root = Path(home) / name
        if root.exists():
            raise DuplicateNameError(f"project {name} already exists")
        try:
            root.mkdir(parents=True)
            (root / "baselines").mkdir()
            store = cls(name=name, root=root)
            store.project_json.write_text(
                json.dumps({"name": name, "created": created}, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            raise StorageFailureError(f"cannot create project store: {exc}") from exc
        return store

    @classmethod
    def open(cls, home: Path, name: str) -> "ProjectStore":
        root = Path(home) / name
        if not (root / "project.json").exists():
            raise NotFoundError(f"project {name} not found under {home}")
        return cls(name=name, root=root)

    @staticmethod
    def list_projects(home: Path) -> list[str]:
        home = Path(home)
        if not home.exists():
            return []
        return sorted(
            entry.name for entry in home.iterdir() if (entry / "project.json").exists()
        )
