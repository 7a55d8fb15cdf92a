"""Training sequences, data payloads and frame assembly.

A frame is ``[s, 0_{Ng}, d]``: ``n_train`` preamble symbols, ``n_guard``
empty symbols that absorb channel dispersion, then ``n_data`` payload
symbols. Everything here is symbol-spaced complex baseband.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameSpec:
    """Frame geometry.

    Attributes:
        n_train: number of training symbols (Ns).
        n_guard: number of empty symbols (Ng).
        n_data: number of data symbols (Nd).
        power: average per-symbol power P (linear).
    """

    n_train: int = 32
    n_guard: int = 8
    n_data: int = 120
    power: float = 1.0

    def __post_init__(self):
        if self.n_train < 1:
            raise ValueError(f"n_train must be >= 1, got {self.n_train}")
        if self.n_guard < 0 or self.n_data < 0:
            raise ValueError(
                f"n_guard and n_data must be >= 0, got {self.n_guard}, {self.n_data}"
            )
        if not self.power > 0:
            raise ValueError(f"power must be > 0, got {self.power}")

    @classmethod
    def from_lengths(cls, n_train: int, frame_len: int, n_guard: int = 8, power: float = 1.0):
        """Build a spec from (Ns, M); the data segment fills what is left."""
        n_data = frame_len - n_train - n_guard
        if n_data < 0:
            raise ValueError(
                f"frame_len={frame_len} too short for n_train={n_train} + n_guard={n_guard}"
            )
        return cls(n_train=n_train, n_guard=n_guard, n_data=n_data, power=power)

    @property
    def frame_len(self) -> int:
        return self.n_train + self.n_guard + self.n_data

    @property
    def search_len(self) -> int:
        """Number of candidate offsets, ``M - Ns``."""
        return self.frame_len - self.n_train


def zadoff_chu(length: int, root: int = 1, power: float = 1.0) -> np.ndarray:
    """Zadoff-Chu sequence scaled to per-symbol power ``power``.

    Uses ``exp(-j*pi*u*n^2/N)`` for even ``N`` and ``exp(-j*pi*u*n(n+1)/N)``
    for odd ``N``.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if math.gcd(root, length) != 1:
        raise ValueError(f"root {root} is not coprime with length {length}")
    n = np.arange(length, dtype=np.int64)
    # reduce the integer phase index first; keeps the float argument small
    if length % 2 == 0:
        k = (root * n * n) % (2 * length)
    else:
        k = (root * n * (n + 1)) % (2 * length)
    return np.sqrt(power) * np.exp(-1j * np.pi * k / length)


_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)


def random_data_symbols(count: int, power: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Equiprobable QPSK symbols with average power ``power``.

    ``size`` prepends batch dimensions: the result has shape ``(*size, count)``.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    shape = (count,) if size is None else (*np.atleast_1d(size), count)
    return np.sqrt(power) * _QPSK[rng.integers(0, 4, size=shape)]


def assemble_frame(spec: FrameSpec, train: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Concatenate ``[train, zeros(n_guard), data]``.

    ``data`` may carry leading batch dimensions; ``train`` is broadcast.
    """
    train = np.asarray(train, dtype=complex)
    data = np.asarray(data, dtype=complex)
    if train.shape[-1:] != (spec.n_train,):
        raise ValueError(f"training sequence length {train.shape[-1]} != n_train={spec.n_train}")
    if data.shape[-1:] != (spec.n_data,):
        raise ValueError(f"data length {data.shape[-1]} != n_data={spec.n_data}")
    batch = np.broadcast_shapes(train.shape[:-1], data.shape[:-1])
    frame = np.zeros((*batch, spec.frame_len), dtype=complex)
    frame[..., : spec.n_train] = train
    frame[..., spec.n_train + spec.n_guard :] = data
    return frame
