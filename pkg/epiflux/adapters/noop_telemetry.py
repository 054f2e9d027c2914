from __future__ import annotations

from epiflux.ports.telemetry import Attributes, Telemetry


class NoopTelemetry(Telemetry):
    """Default sink for library calls made without telemetry."""

    def record_event(self, name: str, attributes: Attributes | None = None) -> None:
        return

    def record_error(
        self, name: str, error: BaseException, attributes: Attributes | None = None
    ) -> None:
        return

    def record_progress(
        self, name: str, done: int, total: int, attributes: Attributes | None = None
    ) -> None:
        return
