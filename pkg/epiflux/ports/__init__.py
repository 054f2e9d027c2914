"""Ports (interfaces) for external dependencies."""

from .artifact_store import ArtifactStore
from .random_stream import RandomStream
from .telemetry import Telemetry

__all__ = ['ArtifactStore', 'RandomStream', 'Telemetry']
