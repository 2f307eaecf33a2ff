# Seeded random streams. Every random decision in the package draws from
# a stream derived from the single run seed and a purpose tag, so that
# e.g. re-sampling an epoch never disturbs the split.

import hashlib

import numpy as np

# recorded in every artifact that depends on random draws
PRNG_NAME = "numpy.PCG64"


# the first 16 bytes of SHA-256(tag) as four 32-bit words
def tagWords(tag):
    digest = hashlib.sha256(tag.encode("UTF-8")).digest()

    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def stream(seed, tag):
    if seed < 0:
        raise ValueError("seed must be non-negative, got %d" % seed)

    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32] + tagWords(tag))

    return np.random.Generator(np.random.PCG64(ss))


# return a new list holding 'items' in the order given by a permutation
# drawn from stream (seed, tag).
def shuffled(items, seed, tag):
    items = list(items)
    order = stream(seed, tag).permutation(len(items))

    return [items[i] for i in order]
