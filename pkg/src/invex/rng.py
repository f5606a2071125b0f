"""Seeded random number generation.

All randomness flows through a PCG64 bit generator (numpy's portable 64-bit
generator) seeded explicitly. Gaussian variates are produced with the
Box-Muller transform from uniform doubles so that the stream is fully
determined by PCG64's documented output and does not depend on numpy's
choice of normal sampler.
"""

import numpy as np


def make_rng(seed):
    """Return a ``numpy.random.Generator`` backed by PCG64 for ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def cell_seed(base_seed, *index):
    """Mix a base seed with a cell index into an independent 64-bit seed."""
    ss = np.random.SeedSequence([int(base_seed), *[int(i) for i in index]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gaussian(rng, size, scale=1.0):
    """Draw N(0, scale**2) variates using the Box-Muller transform."""
    n = int(np.prod(size))
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    # u1 in [0, 1); map to (0, 1] so the log is finite
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return scale * z.reshape(size)
