"""Small numeric helpers used by several modules."""

import numpy as np

# Below this |x| the direct csc^2 evaluation loses digits to cancellation in
# 1/sin^2(x) - 1/x^2 style combinations; the truncation error of the series
# is ~x^2/15, under 1e-9 at the threshold.
CSC2_SERIES_THRESHOLD = 1e-4


def csc_squared(x):
    """csc^2(x) with the small-argument series 1/x^2 + 1/3 below threshold."""
    if abs(x) < CSC2_SERIES_THRESHOLD:
        return 1.0 / (x * x) + 1.0 / 3.0
    s = np.sin(x)
    return 1.0 / (s * s)


def fd_step(value):
    """Central-difference step: 1e-6 * max(1, |value|)."""
    return 1e-6 * max(1.0, abs(value))


def sample_stream(seed, index):
    """Counter-based RNG stream for one sample, keyed by (seed, sample index).

    Philox is counter-based, so streams for distinct keys are independent and
    a reduction over sample indices gives identical results for any worker
    count or evaluation order.
    """
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class KeyedStream:
    """Draws from the (seed, index) streams of sample_stream through one
    reused Philox instance.

    Bit-identical to constructing a fresh stream per index; exists because
    stream construction dominates tight per-sample Monte Carlo loops, where
    resetting the generator state is several times cheaper.
    """

    def __init__(self):
        self._bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._gen = np.random.Generator(self._bg)

    def standard_normal(self, seed, index, shape):
        st = self._bg.state
        inner = st["state"]
        inner["counter"][:] = 0
        inner["key"][0] = seed
        inner["key"][1] = index
        st["buffer"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen.standard_normal(shape)


def near_pole(x, period, tol):
    """True when x is within tol of k*period for some integer k >= 1."""
    if x < 0.5 * period:
        return False
    k = round(x / period)
    return k >= 1 and abs(x - k * period) < tol
