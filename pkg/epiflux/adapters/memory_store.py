from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

from epiflux.adapters.filesystem_store import render_csv, render_json
from epiflux.ports.artifact_store import ArtifactStore


class InMemoryStore(ArtifactStore):
    """Keeps rendered artifacts in a dict. Intended for tests and notebooks."""

    def __init__(self) -> None:
        self.files: dict[str, str] = {}

    def write_csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        self.files[name] = render_csv(header, rows)

    def write_json(self, name: str, payload: Mapping[str, Any]) -> None:
        self.files[name] = render_json(payload)

    def read_json(self, name: str) -> Any:
        return json.loads(self.files[name])

    def read_rows(self, name: str) -> list[list[str]]:
        return [line.split(',') for line in self.files[name].splitlines()]

    def location(self) -> str:
        return '<memory>'
