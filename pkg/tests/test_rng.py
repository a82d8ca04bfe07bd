import zlib

import numpy as np

from nbiotrl.rng import KNOWN_STREAMS, RngStream


def test_same_seed_same_stream_replays():
    a = RngStream(42).fresh("fading")
    b = RngStream(42).fresh("fading")
    assert np.array_equal(a.random(100), b.random(100))


def test_streams_are_independent_of_each_other():
    rngs = RngStream(42)
    before = rngs.fresh("traffic").random(10)
    rngs.stream("fading").random(1000)  # consume a sibling stream
    after = rngs.fresh("traffic").random(10)
    assert np.array_equal(before, after)


def test_different_names_differ():
    rngs = RngStream(7)
    assert not np.array_equal(rngs.fresh("fading").random(10),
                              rngs.fresh("traffic").random(10))


def test_different_seeds_differ():
    assert not np.array_equal(RngStream(1).fresh("fading").random(10),
                              RngStream(2).fresh("fading").random(10))


def test_stream_is_cached_and_stateful():
    rngs = RngStream(3)
    first = rngs.stream("exploration").random(5)
    second = rngs.stream("exploration").random(5)
    assert not np.array_equal(first, second)
    replay = RngStream(3).fresh("exploration").random(10)
    assert np.array_equal(np.concatenate([first, second]), replay)


def test_known_stream_keys_collision_free():
    keys = {zlib.crc32(n.encode()) for n in KNOWN_STREAMS}
    assert len(keys) == len(KNOWN_STREAMS)
