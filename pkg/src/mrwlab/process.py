"""Walk parameters, regimes and the two exact-law samplers.

The walk starts at S_0 = 0, takes X_1 ~ Bernoulli(s), and for n >= 1 sets
X_{n+1} = alpha X_U + beta (1 - X_U) with U uniform on {1..n}, alpha ~ B(p),
beta ~ B(q).  Conditionally on the past, X_{n+1} ~ B(q + a S_n / n) with
a = p - q, so (S_n) is a Markov chain.  ``simulate_full_memory`` follows the
uniform-lookback mechanism literally; ``simulate_collapsed`` draws from the
conditional law and needs O(1) memory.  Both produce the same law.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import sequences
from ._rng import RngStream, master_keys, next_double, seed_lane
from .errors import DomainError, ParameterError, TrivialWalkError

LANES = 4


class Regime(str, enum.Enum):
    DIFFUSIVE = "diffusive"
    CRITICAL = "critical"
    SUPERDIFFUSIVE = "superdiffusive"


@dataclass(frozen=True)
class WalkParams:
    """Triple (p, q, s) with the memory parameter a = p - q cached.

    The critical regime is detected by exact equality a == 0.5, so pass
    values whose float difference is exactly one half (0.75/0.25, 1/0.5, ...).
    """

    p: float
    q: float
    s: float
    a: float = field(init=False)

    def __post_init__(self):
        for name in ("p", "q", "s"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{name} must be a real number, got {v!r}")
            v = float(v)
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise ParameterError(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)
        a = self.p - self.q
        # a rounds to 1 for p = 1 and q below half an ulp of 1
        if a == 1.0:
            raise TrivialWalkError(
                f"p={self.p!r}, q={self.q!r} gives a=1: the excluded trivial case where "
                "X_n = X_1 for all n")
        object.__setattr__(self, "a", a)

    @property
    def regime(self):
        return classify(self)

    @property
    def limit_mean(self):
        """Almost-sure limit q/(1-a) of S_n/n."""
        return self.q / (1.0 - self.a)

    def as_dict(self):
        return {"p": self.p, "q": self.q, "s": self.s}


def classify(params):
    a = params.a
    if a < 0.5:
        return Regime.DIFFUSIVE
    if a == 0.5:
        return Regime.CRITICAL
    return Regime.SUPERDIFFUSIVE


def step_probability(params, s_n, n):
    """P(X_{n+1} = 1 | S_n = s_n) = q + a s_n / n."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 <= s_n <= n:
        raise DomainError(f"position {s_n} outside [0, {n}]")
    pi = params.q + params.a * (s_n / n)
    # rounding can push the convex combination one ulp outside [0, 1]
    assert -1e-12 <= pi <= 1.0 + 1e-12, pi
    return min(max(pi, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class Path:
    """One realization: steps X_1..X_n and positions S_0..S_n."""

    steps: np.ndarray
    positions: np.ndarray

    @property
    def n(self):
        return self.steps.size

    def validate(self):
        S = self.positions
        if S.size != self.n + 1 or S[0] != 0:
            raise AssertionError("positions must be S_0..S_n with S_0 = 0")
        if not np.array_equal(np.diff(S), self.steps.astype(np.int64)):
            raise AssertionError("S_k - S_{k-1} != X_k")
        if np.any((self.steps != 0) & (self.steps != 1)):
            raise AssertionError("steps must be 0/1")
        k = np.arange(S.size)
        if np.any(S < 0) or np.any(S > k):
            raise AssertionError("need 0 <= S_k <= k")
        return self


def _path_from_steps(steps):
    positions = np.zeros(steps.size + 1, np.int64)
    np.cumsum(steps, out=positions[1:])
    return Path(steps, positions)


# --------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _collapsed_path(p, q, s, n, st, steps):
    a = p - q
    S = 0.0
    x = 1 if next_double(st, 0) < s else 0
    steps[0] = x
    S += x
    for k in range(1, n):
        fk = float(k)
        x = 1 if next_double(st, 0) * fk < q * fk + a * S else 0
        steps[k] = x
        S += x


@njit(cache=True, nogil=True)
def _full_memory_path(p, q, s, n, st, steps, bits):
    x = 1 if next_double(st, 0) < s else 0
    steps[0] = x
    if x:
        bits[0] |= np.uint8(1)
    for k in range(1, n):
        # U uniform on {1..k}; history index U-1 in 0..k-1
        u = int(next_double(st, 0) * k)
        remembered = (bits[u >> 3] >> np.uint8(u & 7)) & np.uint8(1)
        if remembered:
            x = 1 if next_double(st, 0) < p else 0
        else:
            x = 1 if next_double(st, 0) < q else 0
        steps[k] = x
        if x:
            bits[k >> 3] |= np.uint8(1 << (k & 7))


@njit(cache=True, nogil=True)
def _collapsed_batch(p, q, s, n, key0, key1, first, count, ckpts, want_sum,
                     quad_w, quad_c, brk_w,
                     out_ckpt, out_sum, out_quad, out_brk):
    a = p - q
    nck = ckpts.size
    st = np.empty((LANES, 4), np.uint64)
    S = np.zeros(LANES)
    acc_sum = np.zeros(LANES)
    acc_quad = np.zeros(LANES)
    acc_brk = np.zeros(LANES)
    do_quad = quad_w.size > 0
    do_brk = brk_w.size > 0
    scratch = np.zeros((LANES, max(nck, 1)), np.int64)
    for g in range(0, count, LANES):
        for i in range(LANES):
            seed_lane(st, i, key0, key1, first + g + i)
            acc_brk[i] = 0.0
            S[i] = 1.0 if next_double(st, i) < s else 0.0
            acc_sum[i] = S[i]
            acc_quad[i] = 0.0
            if do_quad and quad_w[1] != 0.0:
                d = S[i] - quad_c
                acc_quad[i] = quad_w[1] * d * d
        ci = 0
        if nck > 0 and ckpts[0] == 1:
            for i in range(LANES):
                scratch[i, 0] = np.int64(S[i])
            ci = 1
        for k in range(1, n):
            fk = float(k)
            qk = q * fk
            if do_brk:
                wb = brk_w[k + 1]
                invk = 1.0 / fk
                for i in range(LANES):
                    pr = q + a * S[i] * invk
                    acc_brk[i] += wb * pr * (1.0 - pr)
            for i in range(LANES):
                Si = S[i]
                S[i] = Si + (1.0 if next_double(st, i) * fk < qk + a * Si else 0.0)
            kk = k + 1
            if want_sum:
                for i in range(LANES):
                    acc_sum[i] += S[i]
            if do_quad:
                w = quad_w[kk]
                if w != 0.0:
                    c = quad_c * kk
                    for i in range(LANES):
                        d = S[i] - c
                        acc_quad[i] += w * d * d
            if ci < nck and ckpts[ci] == kk:
                for i in range(LANES):
                    scratch[i, ci] = np.int64(S[i])
                ci += 1
        for i in range(LANES):
            r = g + i
            if r < count:
                for c in range(nck):
                    out_ckpt[r, c] = scratch[i, c]
                out_sum[r] = acc_sum[i]
                out_quad[r] = acc_quad[i]
                out_brk[r] = acc_brk[i]


@njit(cache=True, nogil=True)
def _full_memory_batch(p, q, s, n, key0, key1, first, count, ckpts, want_sum,
                       quad_w, quad_c, brk_w,
                       out_ckpt, out_sum, out_quad, out_brk):
    a = p - q
    nck = ckpts.size
    st = np.empty((1, 4), np.uint64)
    bits = np.zeros((n + 7) // 8, np.uint8)
    do_quad = quad_w.size > 0
    do_brk = brk_w.size > 0
    for r in range(count):
        seed_lane(st, 0, key0, key1, first + r)
        bits[:] = 0
        brk = 0.0
        x = 1 if next_double(st, 0) < s else 0
        if x:
            bits[0] = 1
        S = float(x)
        acc_sum = S
        acc_quad = 0.0
        if do_quad:
            d = S - quad_c
            acc_quad = quad_w[1] * d * d
        ci = 0
        if nck > 0 and ckpts[0] == 1:
            out_ckpt[r, 0] = x
            ci = 1
        for k in range(1, n):
            if do_brk:
                pr = q + a * S / k
                brk += brk_w[k + 1] * pr * (1.0 - pr)
            u = int(next_double(st, 0) * k)
            remembered = (bits[u >> 3] >> np.uint8(u & 7)) & np.uint8(1)
            if remembered:
                x = 1 if next_double(st, 0) < p else 0
            else:
                x = 1 if next_double(st, 0) < q else 0
            if x:
                bits[k >> 3] |= np.uint8(1 << (k & 7))
            S += x
            kk = k + 1
            if want_sum:
                acc_sum += S
            if do_quad:
                d = S - quad_c * kk
                acc_quad += quad_w[kk] * d * d
            if ci < nck and ckpts[ci] == kk:
                out_ckpt[r, ci] = np.int64(S)
                ci += 1
        out_sum[r] = acc_sum
        out_quad[r] = acc_quad
        out_brk[r] = brk


# --------------------------------------------------------------------------
# single paths


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return int(n)


def simulate_collapsed(params, n, rng):
    """Sample a path from the conditional step law B(q + a S_k / k)."""
    n = _check_n(n)
    steps = np.empty(n, np.uint8)
    _collapsed_path(params.p, params.q, params.s, n, rng.state, steps)
    return _path_from_steps(steps)


def simulate_full_memory(params, n, rng):
    """Sample a path by uniform lookback over a packed bit history."""
    n = _check_n(n)
    steps = np.empty(n, np.uint8)
    bits = np.zeros((n + 7) // 8, np.uint8)
    _full_memory_path(params.p, params.q, params.s, n, rng.state, steps, bits)
    return _path_from_steps(steps)


# --------------------------------------------------------------------------
# batches


@dataclass(frozen=True)
class Recorder:
    """What ``simulate_batch`` extracts from each replica.

    checkpoints
        Times k at which S_k is stored.
    position_sum
        Accumulate S_1 + ... + S_n (center of mass).
    quadratic
        ``(center, weighting)``: accumulate sum_k w_k (S_k/k - center)².
        ``"diffusive"`` uses w_k = 1; ``"critical"`` uses w_k = 1/log(k)²
        for k >= 2.
    bracket
        Accumulate the predictable quadratic variation <M>_n.
    """

    checkpoints: tuple = ()
    position_sum: bool = False
    quadratic: tuple = None
    bracket: bool = False

    def __post_init__(self):
        ck = tuple(sorted(set(int(k) for k in self.checkpoints)))
        object.__setattr__(self, "checkpoints", ck)
        if self.quadratic is not None:
            center, kind = self.quadratic
            if kind not in ("diffusive", "critical"):
                raise ValueError(f"unknown quadratic weighting {kind!r}")
            object.__setattr__(self, "quadratic", (float(center), kind))


def final_position(n):
    return Recorder(checkpoints=(n,))


@dataclass(frozen=True, eq=False)
class BatchRecord:
    """Per-replica outputs, row i belonging to substream i."""

    n: int
    checkpoints: tuple
    positions: np.ndarray
    position_sum: np.ndarray = None
    quadratic: np.ndarray = None
    bracket: np.ndarray = None

    @property
    def replicas(self):
        return self.positions.shape[0]

    def at(self, k):
        return self.positions[:, self.checkpoints.index(k)]

    @property
    def final(self):
        return self.at(self.n)

    def __eq__(self, other):
        if not isinstance(other, BatchRecord):
            return NotImplemented
        if (self.n, self.checkpoints) != (other.n, other.checkpoints):
            return False
        for name in ("positions", "position_sum", "quadratic", "bracket"):
            x, y = getattr(self, name), getattr(other, name)
            if (x is None) != (y is None):
                return False
            if x is not None and not np.array_equal(x, y):
                return False
        return True


def _quad_weights(n, kind):
    k = np.arange(n + 1, dtype=float)
    w = np.zeros(n + 1)
    if kind == "diffusive":
        w[1:] = 1.0 / k[1:] ** 2
    else:
        w[2:] = 1.0 / (k[2:] * np.log(k[2:])) ** 2
    return w


def simulate_batch(params, n, replicas, master_seed, recorder, workers=1,
                   sampler="collapsed"):
    """Run ``replicas`` independent walks; replica i uses substream (seed, i).

    Results are written by replica index, so they are the same for any
    ``workers`` count.
    """
    n = _check_n(n)
    replicas = int(replicas)
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if recorder.checkpoints and not 1 <= recorder.checkpoints[0] <= recorder.checkpoints[-1] <= n:
        raise DomainError(f"checkpoints must lie in [1, {n}]")
    kernel = {"collapsed": _collapsed_batch, "full_memory": _full_memory_batch}[sampler]
    key0, key1 = master_keys(master_seed)
    ckpts = np.asarray(recorder.checkpoints, np.int64)
    empty = np.zeros(0)
    quad_w, quad_c = empty, 0.0
    if recorder.quadratic is not None:
        quad_c = recorder.quadratic[0]
        quad_w = _quad_weights(n, recorder.quadratic[1])
    brk_w = empty
    if recorder.bracket:
        if params.a <= -1.0:
            raise DomainError("bracket needs a > -1")
        brk_w = np.asarray(sequences.table(params.a, n).an[: n + 1]) ** 2

    out_ckpt = np.zeros((replicas, ckpts.size), np.int64)
    out_sum = np.zeros(replicas)
    out_quad = np.zeros(replicas)
    out_brk = np.zeros(replicas)

    def run(lo, hi):
        kernel(params.p, params.q, params.s, n, key0, key1, lo, hi - lo, ckpts,
               recorder.position_sum, quad_w, quad_c, brk_w,
               out_ckpt[lo:hi], out_sum[lo:hi], out_quad[lo:hi], out_brk[lo:hi])

    workers = max(1, int(workers))
    if workers == 1 or replicas < 2 * LANES:
        run(0, replicas)
    else:
        chunks = min(replicas // LANES, 4 * workers)
        bounds = np.linspace(0, replicas, chunks + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, bounds[:-1], bounds[1:]))

    if recorder.bracket:
        m1 = params.s - 2.0 * params.q * params.s + params.q ** 2
        out_brk += m1
    return BatchRecord(
        n=n,
        checkpoints=recorder.checkpoints,
        positions=out_ckpt,
        position_sum=out_sum if recorder.position_sum else None,
        quadratic=out_quad if recorder.quadratic is not None else None,
        bracket=out_brk if recorder.bracket else None,
    )


__all__ = [
    "BatchRecord", "LANES", "Path", "Recorder", "Regime", "RngStream", "WalkParams",
    "classify", "final_position", "simulate_batch", "simulate_collapsed",
    "simulate_full_memory", "step_probability",
]
