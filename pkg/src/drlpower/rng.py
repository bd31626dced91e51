"""Named, independent random streams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Generator for ``name``; the same (seed, name) always yields the same stream.

    Streams are keyed by name rather than by creation order, so adding a policy arm
    or another agent never shifts the draws of the world streams.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), key])))


class Streams:
    """Lazily created named streams for one simulation run."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._cache:
            self._cache[name] = stream(self.master_seed, name)
        return self._cache[name]
