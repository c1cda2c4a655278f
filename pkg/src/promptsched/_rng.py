import zlib

import numpy as np


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent, reproducible stream for (seed, *keys).

    String keys are hashed with crc32 so the stream does not depend on
    Python's per-process hash randomization.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) & 0xFFFFFFFF)
    return np.random.default_rng(words)
