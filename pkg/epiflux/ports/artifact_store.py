from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from typing import Any, Protocol


class ArtifactStore(Protocol):
    """Output port for study artifacts.

    Implementations own the byte format: UTF-8, ``\\n`` line terminators,
    ``.`` as decimal separator and 17 significant digits for floats.
    """

    def write_csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        """Write a CSV table named ``name`` (e.g. ``'grid.csv'``)."""

    def write_json(self, name: str, payload: Mapping[str, Any]) -> None:
        """Write a JSON document with sorted keys."""

    def location(self) -> str:
        """Human-readable location of the store (directory path or label)."""
