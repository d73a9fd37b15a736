"""Dense linear algebra helpers, seeded randomness and the sigmoid family.

Matrices are plain 2-D ``float64`` numpy arrays in row-major (C) order.
"""

import numpy as np

from sann.errors import InputError

CLAMP = 500.0


def sigmoid(x):
    """Logistic function, with the argument clamped to +-500 before ``exp``.

    Works on scalars and arrays; scalars come back as Python floats.
    """
    z = np.clip(x, -CLAMP, CLAMP)
    y = 1.0 / (1.0 + np.exp(-z))
    if np.ndim(y) == 0:
        return float(y)
    return y


def sigmoid_prime_from_output(y):
    """Derivative of the sigmoid expressed through its output: y * (1 - y)."""
    return y * (1.0 - y)


def zeros(rows, cols):
    return np.zeros((rows, cols), dtype=np.float64)


def identity(n):
    return np.eye(n, dtype=np.float64)


def mat_vec(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise InputError(f"cannot multiply {m.shape} matrix by vector of shape {v.shape}")
    return m @ v


class Rng:
    """Seeded generator (PCG64). One instance per thread."""

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, lo, hi, size=None):
        if not lo < hi:
            raise InputError(f"empty interval [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def integers(self, lo, hi, size=None):
        return self._gen.integers(lo, hi, size)


def rand_uniform(rng, lo, hi):
    return float(rng.uniform(lo, hi))
