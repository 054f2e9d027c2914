from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

from epiflux.ports.artifact_store import ArtifactStore


def format_cell(value: Any) -> str:
    """Render one CSV cell: floats with 17 significant digits, None as empty."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, '.17g')
    try:
        import numpy as np

        if isinstance(value, np.integer):
            return str(int(value))
        if isinstance(value, np.floating):
            return format(float(value), '.17g')
    except ImportError:  # pragma: no cover - numpy is a declared dependency
        pass
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines: list[list[str]] = [list(header)]
    lines.extend([format_cell(v) for v in row] for row in rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerows(lines)
    return buf.getvalue()


def render_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + '\n'


class FilesystemStore(ArtifactStore):
    """Writes artifacts into a directory, creating it on first use."""

    def __init__(self, directory: Path | str) -> None:
        self._directory = Path(directory).resolve()

    @property
    def directory(self) -> Path:
        return self._directory

    def _path(self, name: str) -> Path:
        self._directory.mkdir(parents=True, exist_ok=True)
        return self._directory / name

    def write_csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        self._path(name).write_bytes(render_csv(header, rows).encode('utf-8'))

    def write_json(self, name: str, payload: Mapping[str, Any]) -> None:
        self._path(name).write_bytes(render_json(payload).encode('utf-8'))

    def location(self) -> str:
        return str(self._directory)
