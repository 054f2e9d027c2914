"""Deterministic, splittable random streams.

Realisation ``index`` of a study seeded with ``seed`` draws from a Philox
(counter-based) generator keyed by ``SeedSequence(seed, spawn_key=(index,))``.
Identical ``(seed, index)`` pairs give identical streams; distinct indices give
independent streams.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from epiflux.services.constants import RNG_BLOCK_SIZE


class PhiloxStream:
    """Buffered uniform and exponential variates from one Philox stream."""

    __slots__ = ('_generator', '_buffer', '_pos', '_block', 'seed', 'index')

    def __init__(self, seed: int, index: int = 0, *, block_size: int = RNG_BLOCK_SIZE) -> None:
        if not 0 <= seed < 2**64:
            raise ValueError('seed must be an unsigned 64-bit integer')
        if index < 0:
            raise ValueError('index must be non-negative')
        self.seed = int(seed)
        self.index = int(index)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        self._generator = np.random.Generator(np.random.Philox(seq))
        self._block = int(block_size)
        self._buffer: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        """Next U ~ Uniform[0, 1)."""
        if self._pos >= len(self._buffer):
            self._buffer = self._generator.random(self._block).tolist()
            self._pos = 0
        u = self._buffer[self._pos]
        self._pos += 1
        return u

    def exponential(self, rate: float) -> float:
        """Next Exp(rate) waiting time by inversion of one uniform."""
        return -math.log1p(-self.uniform()) / rate

    def uniforms(self, size: int) -> npt.NDArray[np.float64]:
        """The next ``size`` uniforms, identical to ``size`` calls of :meth:`uniform`."""
        if size < 0:
            raise ValueError('size must be non-negative')
        head = np.array(self._buffer[self._pos : self._pos + size], dtype=np.float64)
        self._pos += len(head)
        need = size - len(head)
        if need <= 0:
            return head
        blocks = -(-need // self._block)
        fresh = self._generator.random(blocks * self._block)
        self._buffer = fresh[need:].tolist()
        self._pos = 0
        return np.concatenate([head, fresh[:need]])


def stream_for(seed: int, index: int = 0) -> PhiloxStream:
    return PhiloxStream(seed, index)
