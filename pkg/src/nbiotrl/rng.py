"""Named deterministic random sub-streams.

Every stochastic component (placement, traffic, fading, preamble choice,
scheduling order, exploration, replay sampling, weight init) draws from its
own named stream so that runs are replayable: the same seed, stream name and
draw index always yield the same value, regardless of what the other streams
consumed in between.
"""

import zlib

import numpy as np

# Streams used by the simulator and the training loop. Other names are
# allowed; this list exists so tests can assert the names stay collision-free.
KNOWN_STREAMS = (
    "placement",
    "traffic",
    "fading",
    "preamble-choice",
    "scheduling-order",
    "exploration",
    "replay-sampling",
    "init",
)


def _stream_key(name: str) -> int:
    # crc32 is stable across platforms and Python versions (unlike hash()).
    return zlib.crc32(name.encode("utf-8"))


class RngStream:
    """Factory of named, seed-derived :class:`numpy.random.Generator` streams."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """Return the generator for ``name``, creating it on first use.

        The generator is stateful: repeated calls return the same object, so
        draw indices advance monotonically within a run.
        """
        gen = self._streams.get(name)
        if gen is None:
            gen = self.fresh(name)
            self._streams[name] = gen
        return gen

    def fresh(self, name: str) -> np.random.Generator:
        """A new generator for ``name`` rewound to draw index 0."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(_stream_key(name),))
        return np.random.Generator(np.random.PCG64(seq))
