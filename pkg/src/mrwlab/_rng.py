"""xoshiro256** generator with keyed substreams, usable from numba kernels.

Replica ``i`` of master seed ``m`` always starts from the same 256-bit state,
independent of how replicas are grouped or scheduled.  The master seed (any
non-negative integer) is expanded through :class:`numpy.random.SeedSequence`
into two 64-bit keys; the per-replica state is then derived with SplitMix64
mixing so that millions of substreams can be opened inside compiled code.
"""

import numpy as np
from numba import njit, uint64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def master_keys(seed):
    """Expand an arbitrary-width non-negative integer seed into two uint64 keys."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    k0, k1 = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return np.uint64(k0), np.uint64(k1)


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(inline="always")
def seed_lane(st, lane, key0, key1, index):
    z = key0 ^ _mix64(uint64(index) ^ key1)
    for j in range(4):
        z = z + _GOLDEN
        st[lane, j] = _mix64(z)
    if st[lane, 0] == 0 and st[lane, 1] == 0 and st[lane, 2] == 0 and st[lane, 3] == 0:
        st[lane, 0] = _GOLDEN


@njit(inline="always")
def next_u64(st, lane):
    s0 = st[lane, 0]
    s1 = st[lane, 1]
    s2 = st[lane, 2]
    s3 = st[lane, 3]
    x = s1 * uint64(5)
    res = ((x << uint64(7)) | (x >> uint64(57))) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
    st[lane, 0] = s0
    st[lane, 1] = s1
    st[lane, 2] = s2
    st[lane, 3] = s3
    return res


@njit(inline="always")
def next_double(st, lane):
    """Uniform double on the 2**-53 grid of [0, 1)."""
    return float(next_u64(st, lane) >> uint64(11)) * _INV53


@njit(cache=True)
def _seeded_state(key0, key1, index):
    st = np.empty((1, 4), np.uint64)
    seed_lane(st, 0, key0, key1, index)
    return st


@njit(cache=True)
def _fill_doubles(st, out):
    for i in range(out.size):
        out[i] = next_double(st, 0)


@njit(cache=True)
def _fill_raw(st, out):
    for i in range(out.size):
        out[i] = next_u64(st, 0)


class RngStream:
    """Deterministic single-owner stream identified by ``(seed, index)``.

    ``RngStream(m, i)`` reproduces exactly the draws that replica ``i`` of a
    batch with master seed ``m`` consumes.  Not safe to share between threads.
    """

    def __init__(self, seed, index=0):
        if int(index) < 0:
            raise ValueError("substream index must be non-negative")
        self.seed = int(seed)
        self.index = int(index)
        self._keys = master_keys(seed)
        self.state = _seeded_state(self._keys[0], self._keys[1], np.uint64(self.index))

    @classmethod
    def derive(cls, master_seed, replica_index):
        return cls(master_seed, replica_index)

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = np.empty(n)
        _fill_doubles(self.state, out)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def random_raw(self, size):
        out = np.empty(int(size), np.uint64)
        _fill_raw(self.state, out)
        return out

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index})"
