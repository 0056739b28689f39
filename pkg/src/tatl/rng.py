"""Seeded random streams.

Every stochastic call site asks for its own stream, keyed by an integer seed
plus a few labels.  Streams are Philox (counter based), so two call sites with
different labels never share state and results do not depend on call order.
"""

import zlib

import numpy as np


def _label_key(label):
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def stream(seed, *labels):
    """Return an independent ``np.random.Generator`` for ``(seed, *labels)``."""
    entropy = [int(seed) & 0xFFFFFFFF] + [_label_key(lab) for lab in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def child_seed(seed, *labels):
    """Derive a plain integer seed, for APIs that take ints rather than generators."""
    return int(stream(seed, *labels).integers(0, 2**31 - 1))
