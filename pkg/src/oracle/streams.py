"""
Seeded, splittable random streams for the Monte Carlo oracles.

Each stream is a counter-based Philox generator keyed by (seed, purpose,
indices), so the stream feeding one link never depends on how many other
links exist.
"""

from enum import IntEnum

import numpy as np

# Midpoints of a 52-bit grid: every value is strictly inside (0, 1).
_GRID_BITS = 52


class Purpose(IntEnum):
    """Stream namespaces, one per kind of random draw"""

    ARRIVAL = 1
    ACCESS = 2
    GAIN_OWN = 3
    GAIN_SU_TO_SU = 4
    GAIN_PU_TO_SU = 5
    GAIN_SU_TO_PU = 6
    GAIN_PU_TO_PU = 7
    CHANNEL_OWN = 8
    CHANNEL_SU_INTERFERER = 9
    CHANNEL_PU_INTERFERER = 10
    OPTIMIZER_STARTS = 11


class StreamFactory:
    """
    Hands out independent generators derived from one 64-bit seed.
    """

    def __init__(self, seed: int):
        """
        Args:
            seed (int): Unsigned 64-bit master seed.
        """
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed

    def stream(self, purpose: Purpose, *index: int) -> np.random.Generator:
        """
        Generator for one purpose and link index.

        Args:
            purpose (Purpose): Kind of draw.
            *index (int): Link coordinates (user index, interferer index, ...).

        Returns:
            np.random.Generator: Philox-backed generator.
        """
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(purpose), *index))
        return np.random.Generator(np.random.Philox(sequence))


def open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    ticks = rng.integers(0, 2**_GRID_BITS, size=size, dtype=np.int64)
    return (ticks + 0.5) * 2.0**-_GRID_BITS


def exponential(rng: np.random.Generator, rate: float, size: int) -> np.ndarray:
    """
    Exponential variates with mean 1/rate by inverse CDF.

    Args:
        rng (np.random.Generator): Source stream.
        rate (float): Rate parameter delta.
        size (int): Number of draws.

    Returns:
        np.ndarray: -ln(1 - U) / rate with U in (0, 1).
    """
    return -np.log1p(-open_uniform(rng, size)) / rate
