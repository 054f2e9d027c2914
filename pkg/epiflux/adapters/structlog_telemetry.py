from __future__ import annotations

import logging
import sys
from typing import Any

import structlog

from epiflux.ports.telemetry import Attributes, Telemetry


class StructlogTelemetry(Telemetry):
    """Key/value telemetry on a structlog logger.

    ``bind`` returns a child that stamps every record with run context
    (study, seed, population size) without threading it through the services.
    """

    def __init__(self, logger: Any | None = None, logger_name: str = 'epiflux') -> None:
        self._logger = logger if logger is not None else structlog.get_logger(logger_name)

    def bind(self, **context: Any) -> StructlogTelemetry:
        return StructlogTelemetry(self._logger.bind(**context))

    def record_event(self, name: str, attributes: Attributes | None = None) -> None:
        self._logger.info(name, **dict(attributes or {}))

    def record_error(
        self, name: str, error: BaseException, attributes: Attributes | None = None
    ) -> None:
        attrs = dict(attributes or {})
        attrs['error_type'] = type(error).__name__
        attrs['error_message'] = str(error)
        self._logger.error(name, **attrs)

    def record_progress(
        self, name: str, done: int, total: int, attributes: Attributes | None = None
    ) -> None:
        percent = round(100.0 * done / total, 1) if total > 0 else 100.0
        self._logger.debug(name, done=done, total=total, percent=percent, **dict(attributes or {}))


def configure_logging(level: str = 'INFO') -> None:
    """Route structlog output to stderr at ``level`` with a console renderer."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(stream=sys.stderr, level=numeric, format='%(message)s')
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt='iso'),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
