"""Adapters: concrete implementations of ports."""

from .filesystem_store import FilesystemStore
from .memory_store import InMemoryStore
from .noop_telemetry import NoopTelemetry
from .structlog_telemetry import StructlogTelemetry, configure_logging

__all__ = [
    'FilesystemStore',
    'InMemoryStore',
    'NoopTelemetry',
    'StructlogTelemetry',
    'configure_logging',
]
