"""Deterministic noise streams keyed by who draws and why.

Every random draw in a run is tied to a StreamKey naming the consumer
(particle, window, substep) and the purpose of the draw. Streams are
counter-based (Philox-4x64), so any single stream can be re-derived in
isolation and runs are bit-reproducible regardless of execution order or
worker count. Gaussians come from numpy's Generator.normal (ziggurat).

Key packing: the master seed fills the first 64-bit Philox key word; the
(particle, window, substep, purpose) tuple is packed injectively into the
second word, so distinct keys always map to distinct Philox streams.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Purpose",
    "StreamKey",
    "derive_stream",
    "sample_brownian",
    "sample_noise_window",
]


class Purpose(Enum):
    """What a stream's draws are consumed for. Purposes never share draws."""

    MODEL_NOISE = 0
    JITTER_NOISE = 1
    RESAMPLE_UNIFORM = 2
    OBS_NOISE = 3
    TRUTH_NOISE = 4
    RANK_TIE = 5


# field widths for packing the second Philox key word
_PURPOSE_BITS = 3
_SUBSTEP_BITS = 16
_WINDOW_BITS = 24
_PARTICLE_BITS = 21

_MAX_PARTICLE = 1 << _PARTICLE_BITS
_MAX_WINDOW = 1 << _WINDOW_BITS
_MAX_SUBSTEP = 1 << _SUBSTEP_BITS


@dataclass(frozen=True)
class StreamKey:
    """Identity of one noise stream.

    particle_id indexes ensemble members; coordinator-level draws
    (resampling uniforms, observation noise, rank ties) use particle_id 0.
    window_index 0 is reserved for initialisation draws; assimilation
    windows count from 1. substep counts from 1.
    """

    master_seed: int
    particle_id: int
    window_index: int
    substep: int
    purpose: Purpose

    def __post_init__(self):
        if not 0 <= self.particle_id < _MAX_PARTICLE:
            raise ValueError(f"particle_id out of range: {self.particle_id}")
        if not 0 <= self.window_index < _MAX_WINDOW:
            raise ValueError(f"window_index out of range: {self.window_index}")
        if not 1 <= self.substep < _MAX_SUBSTEP:
            raise ValueError(f"substep out of range: {self.substep}")
        if not isinstance(self.purpose, Purpose):
            raise ValueError(f"purpose must be a Purpose, got {self.purpose!r}")

    def _packed(self) -> int:
        word = self.particle_id
        word = (word << _WINDOW_BITS) | self.window_index
        word = (word << _SUBSTEP_BITS) | self.substep
        word = (word << _PURPOSE_BITS) | self.purpose.value
        return word


def derive_stream(key: StreamKey) -> np.random.Generator:
    """Return a fresh Generator for the key. Pure: same key, same stream."""
    words = np.array([key.master_seed & 0xFFFFFFFFFFFFFFFF, key._packed()],
                     dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=words))


def sample_brownian(stream: np.random.Generator, n: int, n_noise: int,
                    dt: float) -> np.ndarray:
    """Draw an (n, n_noise) matrix of N(0, dt) Brownian increments."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return stream.normal(scale=np.sqrt(dt), size=(n, n_noise))


def sample_noise_window(master_seed: int, particle_id: int, window_index: int,
                        n_steps: int, n_noise: int, dt: float,
                        purpose: Purpose = Purpose.MODEL_NOISE) -> np.ndarray:
    """Draw a whole (n_steps, n_noise) window, one substep stream per row.

    Row n comes from the stream keyed with substep=n+1, so filters that
    uncover increments one substep at a time see bit-identical noise to
    filters that draw the window up front.
    """
    out = np.empty((n_steps, n_noise))
    for n in range(n_steps):
        key = StreamKey(master_seed, particle_id, window_index, n + 1, purpose)
        out[n] = sample_brownian(derive_stream(key), 1, n_noise, dt)[0]
    return out
