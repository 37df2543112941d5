"""Deterministic normalizing sequences of the walk.

For a memory parameter ``-1 < a < 1``::

    a_1 = 1,   a_{n+1} = a_n * n / (n + a)     (= Γ(n)Γ(a+1)/Γ(n+a))
    A_n = a_1 + ... + a_n = (n a_n - a) / (1 - a)
    v_n = a_1² + ... + a_n²

``a_n`` is accumulated in log space with compensated summation, which keeps
the relative error near machine precision even for n = 10⁷; the log-Gamma
expression suffers catastrophic cancellation at that size.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, TableError


def _check_a(a):
    a = float(a)
    if not -1.0 < a < 1.0:
        raise DomainError(f"memory parameter a={a} outside (-1, 1)")
    return a


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return int(n)


@njit(cache=True)
def _log_a_kahan(a, n):
    # log a_n = -sum_{k<n} log1p(a/k)
    total = 0.0
    comp = 0.0
    for k in range(1, n):
        y = -math.log1p(a / k) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@njit(cache=True)
def _fill_tables(a, n, an, big_a, v):
    total = 0.0
    comp = 0.0
    vs = 0.0
    vc = 0.0
    an[0] = 0.0
    big_a[0] = 0.0
    v[0] = 0.0
    for k in range(1, n + 1):
        if k > 1:
            y = -math.log1p(a / (k - 1)) - comp
            t = total + y
            comp = (t - total) - y
            total = t
        x = math.exp(total)
        an[k] = x
        big_a[k] = (k * x - a) / (1.0 - a)
        y2 = x * x - vc
        t2 = vs + y2
        vc = (t2 - vs) - y2
        vs = t2
        v[k] = vs


@njit(cache=True)
def _v_kahan(a, n):
    total = 0.0
    comp = 0.0
    vs = 0.0
    vc = 0.0
    for k in range(1, n + 1):
        if k > 1:
            y = -math.log1p(a / (k - 1)) - comp
            t = total + y
            comp = (t - total) - y
            total = t
        x = math.exp(total)
        y2 = x * x - vc
        t2 = vs + y2
        vc = (t2 - vs) - y2
        vs = t2
    return vs


@dataclass(frozen=True, eq=False)
class SequenceTable:
    """Read-only arrays ``a_n``, ``A_n``, ``v_n`` indexed by n = 0..N.

    Index 0 holds 0 (``A_0 = v_0 = 0``; ``a_0`` is unused).
    """

    a: float
    an: np.ndarray
    big_a: np.ndarray
    v: np.ndarray

    @property
    def size(self):
        return self.an.size - 1

    def require(self, n):
        if n > self.size:
            raise TableError(f"table for a={self.a} covers n <= {self.size}, need {n}")


def build_table(a, n):
    a = _check_a(a)
    n = _check_n(n)
    an = np.empty(n + 1)
    big_a = np.empty(n + 1)
    v = np.empty(n + 1)
    _fill_tables(a, n, an, big_a, v)
    for arr in (an, big_a, v):
        arr.flags.writeable = False
    return SequenceTable(a, an, big_a, v)


_cache = {}
_cache_lock = threading.Lock()
_CACHE_SLOTS = 8


def table(a, n):
    """Cached table covering at least ``n``; grown on demand, one per ``a``."""
    a = _check_a(a)
    n = _check_n(n)
    with _cache_lock:
        tab = _cache.get(a)
        if tab is not None and tab.size >= n:
            return tab
    tab = build_table(a, n)
    with _cache_lock:
        old = _cache.get(a)
        if old is None or old.size < tab.size:
            if a not in _cache and len(_cache) >= _CACHE_SLOTS:
                _cache.pop(next(iter(_cache)))
            _cache[a] = tab
    return tab


def a_seq(a, n):
    """a_n = Γ(n)Γ(a+1)/Γ(n+a), by the compensated product."""
    a = _check_a(a)
    n = _check_n(n)
    if a == 0.0 or n == 1:
        return 1.0
    return math.exp(_log_a_kahan(a, n))


def big_A(a, n):
    """A_n = a_1 + ... + a_n via the closed form (n a_n - a)/(1 - a)."""
    a = _check_a(a)
    n = _check_n(n)
    return (n * a_seq(a, n) - a) / (1.0 - a)


def v_seq(a, n):
    """v_n = a_1² + ... + a_n² (compensated running sum)."""
    a = _check_a(a)
    n = _check_n(n)
    if a == 0.0:
        return float(n)
    return float(_v_kahan(a, n))


def v_limit_diffusive(a):
    """Limit of v_n / n^(1-2a) for a < 1/2: Γ(a+1)² / (1 - 2a)."""
    a = _check_a(a)
    if a >= 0.5:
        raise DomainError(f"v_n / n^(1-2a) has no finite limit for a={a} >= 1/2")
    return math.gamma(a + 1.0) ** 2 / (1.0 - 2.0 * a)


def v_limit_critical_rate():
    """Limit of v_n / log n at a = 1/2."""
    return math.pi / 4.0


@njit(cache=True)
def _hyp_partial(a, k_start, k_stop, log_term, total, comp, lcomp):
    # terms t_k = (Γ(a+1) k! / Γ(k+a+1))², k = k_start..k_stop-1, with
    # log t_k carried in compensated form
    for k in range(k_start, k_stop):
        if k > 0:
            y = -2.0 * math.log1p(a / k) - lcomp
            t = log_term + y
            lcomp = (t - log_term) - y
            log_term = t
        term = math.exp(log_term)
        y2 = term - comp
        t2 = total + y2
        comp = (t2 - total) - y2
        total = t2
    return log_term, total, comp, lcomp


@dataclass(frozen=True)
class SeriesValue:
    value: float
    error_bound: float
    terms: int


def superdiffusive_tail_bounds(a, k):
    """Bounds on sum_{j >= k} (Γ(a+1) j!/Γ(j+a+1))² for 1/2 < a <= 1, k >= 1.

    From Wendel's inequality each term lies in
    [G² (j+1)^(-2a), G² (j+1)^(-2a) (1 + a/(j+1))^(2(1-a))], G = Γ(a+1),
    and sum_{i > k} i^(-2a) lies between the integrals from k+1 and from k.
    """
    g2 = math.gamma(a + 1.0) ** 2
    e = 2.0 * a - 1.0
    lo = g2 * (k + 1.0) ** (-e) / e
    hi = g2 * (1.0 + a / (k + 1.0)) ** (2.0 * (1.0 - a)) * float(k) ** (-e) / e
    return lo, hi


def v_limit_superdiffusive(a, rel_tol=1e-10, max_terms=10**9, detail=False):
    """lim v_n = 3F2(1, 1, 1; a+1, a+1; 1) for 1/2 < a <= 1.

    The series is summed directly until the current term is below
    ``rel_tol`` times the partial sum and the certified tail bracket
    (see :func:`superdiffusive_tail_bounds`) is narrower than ``rel_tol``
    relative.  The midpoint of the bracket is added to the partial sum.
    ``a = 1`` is accepted as a boundary check (the series is π²/6).
    """
    a = float(a)
    if not 0.5 < a <= 1.0:
        raise DomainError(f"the series diverges (or is out of range) for a={a}")
    if not 0.0 < rel_tol < 1.0:
        raise DomainError("rel_tol must lie in (0, 1)")
    log_term, total, comp, lcomp = 0.0, 0.0, 0.0, 0.0
    k = 0
    block = 4096
    while True:
        stop = min(k + block, max_terms)
        log_term, total, comp, lcomp = _hyp_partial(a, k, stop, log_term, total, comp, lcomp)
        k = stop
        last = math.exp(log_term)
        lo, hi = superdiffusive_tail_bounds(a, k)
        half = 0.5 * (hi - lo)
        # compensated summation error is O(eps) relative; budget 8 eps
        err = half + 8.0 * np.finfo(float).eps * total
        if last < rel_tol * total and err <= rel_tol * total:
            val = SeriesValue(total + 0.5 * (lo + hi), err, k)
            return val if detail else val.value
        if k >= max_terms:
            raise DomainError(
                f"could not certify rel_tol={rel_tol} within {max_terms} terms (a={a})")
        block = min(block * 2, 1 << 24)


def an_ratio_residual(a, n):
    """A_n/(n a_n) - 1/(1-a), which equals -a / ((1-a) n a_n).

    Exactly zero at a = 0.  See :func:`an_ratio_residual_gamma` for the
    Gamma-function form of the same quantity.
    """
    a = _check_a(a)
    n = _check_n(n)
    if a == 0.0:
        return 0.0
    return -a / ((1.0 - a) * n * a_seq(a, n))


def an_ratio_residual_gamma(a, n):
    """Γ(n+a) / ((a-1) Γ(a) Γ(n+1)), a ≠ 0 (Γ has a pole at 0)."""
    from scipy import special

    a = _check_a(a)
    n = _check_n(n)
    if a == 0.0:
        raise DomainError("Gamma form has a removable singularity at a = 0")
    return float(special.poch(n + 1, a - 1.0) * special.rgamma(a) / (a - 1.0))
