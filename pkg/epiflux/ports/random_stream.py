from __future__ import annotations

from typing import Protocol


class RandomStream(Protocol):
    """Source of the uniform and exponential variates consumed by the simulator."""

    def uniform(self) -> float:
        """Next U ~ Uniform[0, 1)."""

    def exponential(self, rate: float) -> float:
        """Next Exp(rate) waiting time."""
