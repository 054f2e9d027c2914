"""Pytest configuration for epiflux tests."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from epiflux.adapters.memory_store import InMemoryStore
from epiflux.domain.models import ModelParams, PopulationState, SimConfig
from epiflux.ports.telemetry import Attributes, Telemetry

# Baseline forced epidemic: beta0=20/yr, beta1=0.4,
# gamma=10/yr, nu=1/yr; S(0)=0.92N, I(0)=0.08N, R(0)=0.
BASELINE_RATES: dict[str, float] = {'nu': 1.0, 'gamma': 10.0, 'beta0': 20.0, 'beta1': 0.4}
BASELINE_FRACTIONS: tuple[float, float, float] = (0.92, 0.08, 0.0)


def baseline_params(n_scale: int = 1000) -> ModelParams:
    return ModelParams(n_scale=n_scale, **BASELINE_RATES)


def baseline_initial(n_scale: int = 1000) -> PopulationState:
    return PopulationState.from_fractions(*BASELINE_FRACTIONS, n_scale)


@pytest.fixture
def params() -> ModelParams:
    """Baseline parameters at N = 1000."""
    return baseline_params(1000)


@pytest.fixture
def initial() -> PopulationState:
    return baseline_initial(1000)


@pytest.fixture
def short_config(params: ModelParams) -> SimConfig:
    """A cheap full-log run over [0, 0.2]."""
    return SimConfig(params=params, t_end=0.2, seed=20240601)


@pytest.fixture
def store() -> InMemoryStore:
    return InMemoryStore()


@pytest.fixture
def baseline_document() -> dict[str, Any]:
    """Config document with the model keys only."""
    return {
        'beta0': 20,
        'beta1': 0.4,
        'gamma': 10,
        'nu': 1,
        's0_frac': 0.92,
        'i0_frac': 0.08,
        'r0_frac': 0.0,
    }


@pytest.fixture
def write_config(tmp_path: Path, baseline_document: dict[str, Any]):
    """Write a config file (model keys plus ``extra``) and return its path."""

    def _write(**extra: Any) -> Path:
        path = tmp_path / 'config.json'
        path.write_text(json.dumps({**baseline_document, **extra}), encoding='utf-8')
        return path

    return _write


class RecordingTelemetry(Telemetry):
    """Keeps every recorded event, error and progress tick for assertions."""

    def __init__(self) -> None:
        self.events: list[tuple[str, dict[str, Any]]] = []
        self.errors: list[tuple[str, BaseException, dict[str, Any]]] = []
        self.progress: list[tuple[str, int, int]] = []

    def record_event(self, name: str, attributes: Attributes | None = None) -> None:
        self.events.append((name, dict(attributes or {})))

    def record_error(
        self, name: str, error: BaseException, attributes: Attributes | None = None
    ) -> None:
        self.errors.append((name, error, dict(attributes or {})))

    def record_progress(
        self, name: str, done: int, total: int, attributes: Attributes | None = None
    ) -> None:
        self.progress.append((name, done, total))

    def names(self) -> list[str]:
        return [name for name, _ in self.events]


@pytest.fixture
def fake_telemetry() -> RecordingTelemetry:
    return RecordingTelemetry()
