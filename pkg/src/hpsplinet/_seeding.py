"""Seed derivation shared by the experiment drivers."""

from __future__ import annotations

import numpy as np


def derive_seed(*key) -> int:
    """Stable 63-bit seed from a tuple of ints, floats and strings.

    The same key always gives the same seed, on any platform; order matters.
    """
    words = []
    for k in key:
        if isinstance(k, str):
            words.extend(k.encode())
            words.append(0)
        elif isinstance(k, float) and not k.is_integer():
            words.extend(np.frombuffer(np.float64(k).tobytes(), dtype=np.uint32).tolist())
        else:
            words.append(int(k) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(2, np.uint64)[0] >> np.uint64(1))
