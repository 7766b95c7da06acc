"""Counter-based random streams keyed by (master seed, tag, index)."""
import os
import zlib

import numpy as np

DEFAULT_SEED = 20240101


def default_seed():
    return int(os.environ.get("KCOND_SEED", DEFAULT_SEED))


def _tag_id(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode())


def stream(seed, tag="", index=0):
    """Independent Philox generator for one (seed, tag, index) triple.

    The result does not depend on how many other streams were created or in
    which order, so parallel schedules give identical numbers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag_id(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed_or_rng, tag=""):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if seed_or_rng is None:
        seed_or_rng = default_seed()
    return stream(seed_or_rng, tag)
