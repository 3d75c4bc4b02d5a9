"""Counter-based Gaussian sampling.

All randomness in the package flows through Philox substreams keyed by
``(seed, stream)`` and a Box-Muller transform on the resulting uniforms.
Philox is counter-based, so draws are bit-reproducible for a given key on
any platform; the transcendental functions in Box-Muller keep the final
values identical across platforms to within ~1e-15.

Stream layout conventions used by the rest of the package:

* feature points use ``stream = point index``,
* network weight rows use ``stream = neuron index``,
* auxiliary draws (second-layer signs, target coefficients, calibration
  points) use streams at and above ``AUX_STREAM``.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Base for substreams that are not indexed by a data point / neuron.
AUX_STREAM = 2**48


def substream(seed: int, stream: int) -> np.random.Generator:
    """Generator for the Philox substream keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream & (2**64 - 1)]))


def gaussians(gen: np.random.Generator, count: int) -> np.ndarray:
    """Draw `count` N(0,1) values from `gen` by the Box-Muller transform.

    Uses u1 in (0, 1] (so the log is finite) and u2 in [0, 1):

        z0 = sqrt(-2 log u1) cos(2 pi u2),  z1 = sqrt(-2 log u1) sin(2 pi u2).

    Consumes 2*ceil(count/2) uniforms.
    """
    pairs = (count + 1) // 2
    u = gen.random(2 * pairs)
    u1 = 1.0 - u[:pairs]
    u2 = u[pairs:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(TWO_PI * u2)
    z[1::2] = r * np.sin(TWO_PI * u2)
    return z[:count]


def gaussian_vector(seed: int, stream: int, count: int) -> np.ndarray:
    """`count` N(0,1) draws from the substream (seed, stream)."""
    return gaussians(substream(seed, stream), count)


def gaussian_rows(seed: int, rows: int, cols: int, stream0: int = 0) -> np.ndarray:
    """(rows, cols) standard normals; row i comes from substream (seed, stream0 + i).

    Row i is therefore independent of `rows`: extending the matrix never
    changes existing rows, and rows may be generated in parallel.
    """
    out = np.empty((rows, cols))
    for i in range(rows):
        out[i] = gaussian_vector(seed, stream0 + i, cols)
    return out
