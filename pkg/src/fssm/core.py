"""Shared containers and the deterministic random stream.

The random stream is SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter
advanced by the golden-ratio increment, pushed through a fixed bit mixer.
Reals are the top 53 bits of each output scaled by 2**-53, so they lie in
[0, 1) and are identical on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ShapeMismatch

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


@dataclass(frozen=True)
class Dims:
    """Sequence length ``T``, channel count ``D`` and per-channel state size ``N``."""

    T: int
    D: int
    N: int

    def __post_init__(self):
        for name in ("T", "D", "N"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ShapeMismatch(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True, eq=False)
class Sequence:
    """A validated ``T x D`` array of finite reals.

    Build with :func:`sequence_new`; the stored array is a read-only copy.
    """

    values: np.ndarray

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]

    @property
    def dtype(self):
        return self.values.dtype

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def sequence_new(values, dtype=np.float64) -> Sequence:
    """Validate ``values`` as a rectangular ``T x D`` array of finite reals."""
    if isinstance(values, Sequence):
        values = values.values
    try:
        arr = np.array(values, dtype=dtype, copy=True)
    except ValueError as exc:  # ragged nested lists
        raise ShapeMismatch(f"input is not rectangular: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"expected a non-empty T x D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("sequence contains NaN or Inf")
    arr.setflags(write=False)
    return Sequence(arr)


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 generator.

    Single-owner; use :meth:`clone` to fork an identical copy or
    :meth:`split` to derive an independent child stream.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def clone(self) -> "Rng":
        return Rng(self.state)

    def split(self) -> "Rng":
        return Rng(self.next_u64())

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix64(self.state)

    def next_real(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def u64_array(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs, vectorized; same values as ``n`` calls to :meth:`next_u64`."""
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + k * np.uint64(GOLDEN_GAMMA)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def random(self, shape=()) -> np.ndarray:
        """Uniform reals in [0, 1) filling ``shape`` in C order."""
        n = int(np.prod(shape, dtype=np.int64))
        u = self.u64_array(n)
        return ((u >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(shape)

    def uniform(self, low: float, high: float, shape=()) -> np.ndarray:
        return low + (high - low) * self.random(shape)


def rng_new(seed: int) -> Rng:
    return Rng(seed)
