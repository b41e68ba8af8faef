"""Seeded sampling primitives for the release mechanisms.

All noise is produced by deterministic transforms of uniform draws from a
PCG64 generator, so any (seed, call sequence) pair reproduces bit-identical
output. Uniform draws are taken from the open interval (0, 1) as dyadic
rationals k/2^53 with 1 <= k < 2^53, which keeps the quantile transforms
finite. Laplace noise is the uniform draw pushed through the Laplace inverse
CDF (so u = 0.5 maps to exactly zero noise); Gaussian noise uses the standard
normal inverse CDF.

Worker streams for parallel estimation are spawned from the root seed via
``numpy.random.SeedSequence``, so a fanned-out computation sums to the same
result as the sequential one.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_TWO53 = 1 << 53


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Derive ``count`` independent child generators from one root seed."""
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(count)]


def uniform_open(rng: np.random.Generator, size: int | None = None):
    """Uniform draw(s) strictly inside (0, 1)."""
    ticks = rng.integers(1, _TWO53, size=size)
    return ticks / _TWO53


def laplace_quantile(u, scale: float):
    """Inverse CDF of the zero-mean Laplace distribution with scale ``scale``."""
    u = np.asarray(u, dtype=np.float64)
    lower = scale * np.log(2.0 * np.clip(u, None, 0.5))
    upper = -scale * np.log(2.0 * np.clip(1.0 - u, None, 0.5))
    out = np.where(u < 0.5, lower, upper)
    return float(out) if out.ndim == 0 else out


def normal_quantile(u):
    """Inverse CDF of the standard normal distribution."""
    out = ndtri(u)
    return float(out) if np.ndim(out) == 0 else out


def laplace_noise(rng: np.random.Generator, scale: float, size: int | None = None):
    return laplace_quantile(uniform_open(rng, size), scale)


def gaussian_noise(rng: np.random.Generator, sigma: float, size: int | None = None):
    return sigma * normal_quantile(uniform_open(rng, size))
