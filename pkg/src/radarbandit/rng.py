"""Named, splittable random streams.

Every stochastic component draws from its own stream derived from a single
master seed and a stream name. Streams are built from ``numpy.random.SeedSequence``
with the CRC-32 of the name as the spawn key and use the PCG64 bit generator,
so the sequence a component sees depends only on ``(master_seed, name)``.
Adding or removing another consumer never shifts it.
"""

from __future__ import annotations

import zlib

import numpy as np

SCENE = "scene"
POLICY = "policy"
SENSING = "sensing"
NOISE = "noise"
CALIBRATION = "calibration"


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Return the generator for ``name`` under ``master_seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(seq))


class StreamFactory:
    """Hands out one named generator per component for an episode."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._issued: dict[str, np.random.Generator] = {}

    def __call__(self, name: str) -> np.random.Generator:
        if name not in self._issued:
            self._issued[name] = stream(self.master_seed, name)
        return self._issued[name]
