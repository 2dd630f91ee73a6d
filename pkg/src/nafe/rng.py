"""Deterministic random-number substreams.

All stochastic code in the package draws from Philox (a counter-based
generator) keyed by a documented 64-bit mix of a user seed and one or more
stream identifiers.  Because every logical stream (latent heterogeneity,
regressor noise, idiosyncratic noise, bootstrap replicate b, Monte Carlo
replicate r, ...) owns an independent key, results are bitwise reproducible
regardless of evaluation order or thread count, and enlarging one dimension
of a draw (say T) never perturbs the values drawn on another stream.

The key schedule is versioned: bump SCHEME_VERSION if the mixing function
or stream layout ever changes, so archived seeds remain interpretable.
"""

from __future__ import annotations

import numpy as np

SCHEME_VERSION = 1
GENERATOR_NAME = "philox4x64"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream namespaces; the first identifier passed to substream() should be
# one of these so unrelated subsystems can never collide on a key.
NS_DGP = 1
NS_BOOTSTRAP = 2
NS_MC = 3
NS_PROBE = 4


def mix64(*parts: int) -> int:
    """Fold integers into a single 64-bit value (splitmix64 finalizer chain).

    Each part is masked to 64 bits, added with the golden-ratio increment,
    and passed through the splitmix64 avalanche.  The result is a pure
    integer function of the inputs, identical on every platform.
    """
    z = 0
    for part in parts:
        z = (z + _GOLDEN + (int(part) & _MASK64)) & _MASK64
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & _MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
    return z


def substream(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent Generator for the given (seed, stream...) key.

    The Philox 128-bit key is two mix64 words over the scheme version, the
    seed, and the stream identifiers.
    """
    lo = mix64(SCHEME_VERSION, seed, *stream)
    hi = mix64(SCHEME_VERSION, seed, *stream, 0x5EED)
    return np.random.Generator(np.random.Philox(key=(hi << 64) | lo))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1).

    Maps 53-bit integers 1..2^53-1 onto the open interval, so 0.0 and 1.0
    are never returned.
    """
    return rng.integers(1, 1 << 53, size=size).astype(np.float64) / float(1 << 53)
