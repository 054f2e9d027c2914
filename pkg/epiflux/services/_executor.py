from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from time import monotonic
from typing import Generic, TypeVar

from epiflux.ports.telemetry import Attributes, Telemetry

T = TypeVar('T')


@dataclass(frozen=True, slots=True)
class Timed(Generic[T]):
    value: T
    seconds: float


def run_with_telemetry(
    *,
    do_call: Callable[[], T],
    telemetry: Telemetry | None,
    telemetry_name: str,
    attributes: Attributes | None = None,
) -> Timed[T]:
    """Run a study step and report how long it took.

    - Records `<telemetry_name>.duration` with `duration_ms` on success.
    - Records `<telemetry_name>.error` with `duration_ms` on exception, then re-raises.
    """

    attrs = dict(attributes or {})
    start = monotonic()
    try:
        value = do_call()
    except Exception as exc:  # noqa: BLE001
        if telemetry is not None:
            elapsed_ms = int((monotonic() - start) * 1000)
            telemetry.record_error(
                f'{telemetry_name}.error', exc, {**attrs, 'duration_ms': elapsed_ms}
            )
        raise
    seconds = monotonic() - start
    if telemetry is not None:
        telemetry.record_event(
            f'{telemetry_name}.duration', {**attrs, 'duration_ms': int(seconds * 1000)}
        )
    return Timed(value, seconds)
