"""Observability port.

Event names are dotted ``<area>.<operation>.<outcome>``, for example
``simulator.simulate.ok`` or ``study.scaling.gate``. Attributes carry plain
JSON-compatible values only.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Any, Protocol

Attributes = Mapping[str, Any]


class Telemetry(Protocol):
    def record_event(self, name: str, attributes: Attributes | None = None) -> None:
        """Record a finished step."""

    def record_error(
        self, name: str, error: BaseException, attributes: Attributes | None = None
    ) -> None:
        """Record a failure before it propagates."""

    def record_progress(
        self, name: str, done: int, total: int, attributes: Attributes | None = None
    ) -> None:
        """Record how far a long Monte Carlo loop has got."""
