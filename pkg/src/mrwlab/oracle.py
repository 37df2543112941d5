"""Simulation-free ground truth for the walk.

Everything here is exact up to floating-point rounding: the law of S_n by
dynamic programming over the Markov chain (S_k), the first two moments by
recursion or closed form, and the limit constants of the superdiffusive
martingale limit.

Notation: a = p - q, sigma² = q(1-p)/(1-a)², nu = -q/(1-a), b = q - s(1-a),
and P_n = Γ(n+2a)/(Γ(n)Γ(2a+1)).
"""

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from . import sequences
from .errors import DomainError, NearPoleWarning, ResourceError

N_MAX = 5000
POLE_WINDOW = 1e-8


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return int(n)


def _guard_half(a, what):
    if a == 0.5:
        raise DomainError(f"{what} has a (2a-1) denominator; use the recursion at a = 1/2")
    if abs(a - 0.5) < POLE_WINDOW:
        warnings.warn(f"{what} evaluated at a={a!r}, within {POLE_WINDOW} of the a=1/2 pole;"
                      " expect cancellation", NearPoleWarning, stacklevel=3)


def _need_positive_gamma(a, what):
    if a <= -1.0:
        raise DomainError(f"{what} needs a > -1 (a_n undefined at a = -1)")


# --------------------------------------------------------------------------
# exact law


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Law of S_n on {0, ..., n}."""

    n: int
    pmf: np.ndarray

    def __post_init__(self):
        if self.pmf.shape != (self.n + 1,):
            raise ValueError("pmf must have n+1 entries")
        if np.any(self.pmf < 0):
            raise ValueError("negative probability")

    @property
    def support(self):
        return np.arange(self.n + 1)

    def expect(self, f):
        """E[f(S_n)] for a vectorized f."""
        return float(np.dot(self.pmf, f(self.support.astype(float))))

    def moment(self, k):
        return self.expect(lambda x: x ** k)

    def mean(self):
        return self.moment(1)

    def __getitem__(self, k):
        return float(self.pmf[k]) if 0 <= k <= self.n else 0.0


def exact_distribution(params, n, n_max=N_MAX):
    """Law of S_n by forward DP, P(S_{k+1} = j+1 | S_k = j) = q + a j/k.

    The sweep is carried in extended precision and rounded on output.  Cost
    is O(n²) time, O(n) memory.
    """
    n = _check_n(n)
    if n > n_max:
        raise ResourceError(f"exact_distribution limited to n <= {n_max}, got {n}")
    ld = np.longdouble
    prob = np.zeros(n + 2, ld)
    prob[0] = ld(1) - ld(params.s)
    prob[1] = ld(params.s)
    q, a = ld(params.q), ld(params.a)
    for k in range(1, n):
        j = np.arange(k + 1, dtype=ld)
        up = np.clip(q + a * j / ld(k), 0, 1)
        mass = prob[: k + 1]
        moved = mass * up
        nxt = mass - moved
        nxt[1:] += moved[:-1]
        prob[k + 1] = moved[-1]
        prob[: k + 1] = nxt
    return ExactDistribution(n, prob[: n + 1].astype(float))


# --------------------------------------------------------------------------
# moments of S_n


@njit(cache=True)
def _moment_recursion(q, a, s, n, es, es2):
    # es[k] = E[S_k], es2[k] = E[S_k²], k = 0..n
    es[0] = 0.0
    es2[0] = 0.0
    es[1] = s
    es2[1] = s
    for k in range(1, n):
        m = es[k]
        es[k + 1] = q + (1.0 + a / k) * m
        es2[k + 1] = (1.0 + 2.0 * a / k) * es2[k] + (2.0 * q + a / k) * m + q


def moment_table(params, n):
    """Arrays (E[S_k], E[S_k²]) for k = 0..n by the exact recursions."""
    n = _check_n(n)
    es = np.empty(n + 1)
    es2 = np.empty(n + 1)
    _moment_recursion(params.q, params.a, params.s, n, es, es2)
    return es, es2


def mean_Sn(params, n, method="closed"):
    """E[S_n].

    ``"closed"`` uses a_n E[S_n] = s - q + q A_n (needs a > -1);
    ``"recursion"`` iterates E[S_{k+1}] = q + (1 + a/k) E[S_k].
    """
    n = _check_n(n)
    if method == "recursion":
        return float(moment_table(params, n)[0][n])
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    _need_positive_gamma(params.a, "closed-form E[S_n]")
    a_n = sequences.a_seq(params.a, n)
    A_n = sequences.big_A(params.a, n)
    return (params.s - params.q + params.q * A_n) / a_n


@njit(cache=True)
def _log_p_ratio(a, n):
    # log(a_n² P_n) = sum_{k<n} log(k(k+2a)/(k+a)²) = sum log1p(-a²/(k+a)²), k >= 2
    total = 0.0
    comp = 0.0
    for k in range(2, n):
        r = a / (k + a)
        y = math.log1p(-r * r) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _an2_pn(a, n):
    """a_n² P_n, finite for every a > -1 (zero at a = -1/2, n >= 2)."""
    if n == 1:
        return 1.0
    first = (1.0 + 2.0 * a) / (1.0 + a) ** 2
    return first * math.exp(_log_p_ratio(a, n))


def tau(params):
    """tau = s - 4qs/(1-a) + 2q/(2a-1) + 2q²(3a-2)/((1-a)²(2a-1))."""
    p, q, s, a = params.p, params.q, params.s, params.a
    _guard_half(a, "tau")
    return (s - 4.0 * q * s / (1.0 - a) + 2.0 * q / (2.0 * a - 1.0)
            + 2.0 * q * q * (3.0 * a - 2.0) / ((1.0 - a) ** 2 * (2.0 * a - 1.0)))


def second_moment_Sn(params, n, method="recursion"):
    """E[S_n²] by recursion (any a) or closed form (a ≠ 1/2, a > -1)."""
    n = _check_n(n)
    if method == "recursion":
        return float(moment_table(params, n)[1][n])
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    q, s, a = params.q, params.s, params.a
    _need_positive_gamma(a, "closed-form E[S_n²]")
    _guard_half(a, "closed-form E[S_n²]")
    t = tau(params)
    b = q - s * (1.0 - a)
    a_n = sequences.a_seq(a, n)
    p_n = _an2_pn(a, n) / (a_n * a_n)
    e = 2.0 * a - 1.0
    om = 1.0 - a
    return ((s + t) * p_n
            - q * n / (om * e)
            + q * q * n * (n * e + 1.0) / (om * om * e)
            + b * (-2.0 * q * (n + 1.0) + om) / (om * om * a_n))


def variance_Sn(params, n):
    es, es2 = moment_table(params, n)
    return float(es2[n] - es[n] ** 2)


def cross_covariance(params, j, k):
    """Cov(S_j, S_k) = (a_j / a_k) Var(S_j) for j <= k."""
    j, k = sorted((_check_n(j), _check_n(k)))
    _need_positive_gamma(params.a, "cross_covariance")
    return sequences.a_seq(params.a, j) / sequences.a_seq(params.a, k) * variance_Sn(params, j)


def position_sum_variance(params, n):
    """Var(S_1 + ... + S_n), exact.

    Uses Var(sum) = sum_j Var(S_j) (1 + 2 a_j sum_{k>j} 1/a_k).
    """
    n = _check_n(n)
    _need_positive_gamma(params.a, "position_sum_variance")
    es, es2 = moment_table(params, n)
    var = es2[1:] - es[1:] ** 2
    an = np.asarray(sequences.table(params.a, n).an[1: n + 1])
    inv = 1.0 / an
    after = np.concatenate((np.cumsum(inv[::-1])[::-1][1:], [0.0]))
    return float(np.sum(var * (1.0 + 2.0 * an * after)))


@njit(cache=True)
def _qsl_mean(q, a, s, mu, n, critical):
    # sum_k w_k E[(S_k/k - mu)²], w_k = 1 (diffusive) or 1/log(k)² for k >= 2
    es = s
    es2 = s
    total = 0.0
    for k in range(1, n + 1):
        if k > 1:
            j = k - 1
            es2 = (1.0 + 2.0 * a / j) * es2 + (2.0 * q + a / j) * es + q
            es = q + (1.0 + a / j) * es
        m = (es2 - 2.0 * mu * k * es + (mu * k) ** 2) / (k * k)
        if critical:
            if k >= 2:
                lk = math.log(k)
                total += m / (lk * lk)
        else:
            total += m
    return total


def qsl_expectation(params, n):
    """Exact expectation of the quadratic-strong-law statistic at horizon n.

    Diffusive and superdiffusive: (1/log n) sum_{k<=n} E[(S_k/k - mu)²].
    Critical: (1/log log n) sum_{k=2}^n E[(S_k/k - mu)²]/(log k)².
    """
    n = _check_n(n)
    crit = params.a == 0.5
    if n < (16 if crit else 2):
        raise DomainError("horizon too short for the normalizer")
    total = _qsl_mean(params.q, params.a, params.s, params.limit_mean, n, crit)
    return total / (math.log(math.log(n)) if crit else math.log(n))


# --------------------------------------------------------------------------
# martingale moments


def mean_M2(params, n, method="closed"):
    """E[M_n²] for M_n = a_n S_n - q A_n.

    ``"direct"`` evaluates a_n² E[S_n²] - 2q(s-q)A_n - q²A_n² with the
    recursive second moment; ``"closed"`` is the Gamma-ratio expression
    (a ≠ 1/2).
    """
    n = _check_n(n)
    p, q, s, a = params.p, params.q, params.s, params.a
    _need_positive_gamma(a, "mean_M2")
    if method == "direct":
        a_n = sequences.a_seq(a, n)
        A_n = sequences.big_A(a, n)
        return (a_n * a_n * second_moment_Sn(params, n)
                - 2.0 * q * (s - q) * A_n - q * q * A_n * A_n)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    _guard_half(a, "closed-form E[M_n²]")
    om = 1.0 - a
    b = q - s * om
    a_n = sequences.a_seq(a, n)
    return ((s + tau(params)) * _an2_pn(a, n)
            - q * a * (q * (2.0 - a) - 2.0 * s * om) / om ** 2
            - q * (1.0 - p) * n * a_n * a_n / (om ** 2 * (2.0 * a - 1.0))
            + b * a_n * (om - 2.0 * q) / om ** 2)


def eps2_mean(params, n):
    """E[eps_{n+1}²] = E[pi_n(1 - pi_n)], pi_n = q + a S_n/n."""
    n = _check_n(n)
    q, a = params.q, params.a
    es, es2 = moment_table(params, n)
    val = q * (1.0 - q) + (1.0 - 2.0 * q) * a * es[n] / n - a * a * es2[n] / (n * n)
    # exact value lies in [0, 1/4]; clear rounding noise at the endpoints
    return min(max(val, 0.0), 0.25)


@njit(cache=True)
def _increment_energy(q, a, s, n_from, n_to):
    # sum_{k=n_from}^{n_to} a_k² E[eps_k²] with eps_1 = S_1 - q
    es = s
    es2 = s
    a_k = 1.0
    total = 0.0
    comp = 0.0
    for k in range(1, n_to + 1):
        if k == 1:
            term = s - 2.0 * q * s + q * q
        else:
            j = k - 1
            pe = q * (1.0 - q) + (1.0 - 2.0 * q) * a * es / j - a * a * es2 / (j * j)
            a_k = a_k * j / (j + a)
            term = a_k * a_k * pe
            es2 = (1.0 + 2.0 * a / j) * es2 + (2.0 * q + a / j) * es + q
            es = q + (1.0 + a / j) * es
        if k >= n_from:
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total


@dataclass(frozen=True)
class TailValue:
    value: float
    direct: float
    remainder: float
    error_bound: float
    horizon: int


def tail_s2(params, n, rel_tol=1e-10, horizon=None, detail=False):
    """s_n² = sum_{k >= n} a_k² E[eps_k²] for a > 1/2.

    The terms from n to ``horizon`` are summed directly.  The remainder
    beyond the horizon equals E[M²] - E[M_horizon²] exactly (orthogonal
    increments), which is evaluated in closed form; its rounding error is
    bounded by a few ulps of E[M²].  If that bound exceeds ``rel_tol``
    relative, the horizon is pushed out.
    """
    n = _check_n(n)
    if params.a <= 0.5:
        raise DomainError(f"s_n² diverges for a={params.a} <= 1/2")
    q, a, s = params.q, params.a, params.s
    em2 = limit_constants(params).EM2
    horizon = max(4 * n, 10_000) if horizon is None else int(horizon)
    while True:
        direct = _increment_energy(q, a, s, n, horizon)
        rem = em2 - mean_M2(params, horizon)
        # ulp-level cancellation in the difference, plus the O(k eps) drift
        # of the running product for a_k
        err = float(16.0 * np.finfo(float).eps * (abs(em2) + horizon * abs(direct)))
        total = direct + max(rem, 0.0)
        if total == 0.0 or err <= rel_tol * total or horizon >= 10**8:
            out = TailValue(total, direct, rem, err, horizon)
            return out if detail else out.value
        horizon *= 4


# --------------------------------------------------------------------------
# limit constants


@dataclass(frozen=True)
class LimitConstants:
    """Closed-form constants; fields that do not apply to the regime are None."""

    sigma2: float
    nu: float
    b: float
    EM: float
    ell: float = None
    tau: float = None
    EL: float = None
    EL2: float = None
    EM2: float = None
    sn2_rate: float = None
    EL_martingale: float = None
    EL2_martingale: float = None

    def as_dict(self):
        return asdict(self)


def limit_constants(params):
    """sigma², nu, b, E[M] always; ell for a < 1/2; the rest for a > 1/2.

    ``EL_martingale`` and ``EL2_martingale`` recompute E[L], E[L²] from
    L = (M - qa/(1-a))/Γ(a+1) and E[M], E[M²], an independent route to the
    same numbers.
    """
    p, q, s, a = params.p, params.q, params.s, params.a
    om = 1.0 - a
    sigma2 = q * (1.0 - p) / om ** 2
    nu = -q / om
    b = q - s * om
    em = s - q
    fields = dict(sigma2=sigma2, nu=nu, b=b, EM=em)
    if a < 0.5:
        fields["ell"] = sequences.v_limit_diffusive(a)
    elif a > 0.5:
        t = tau(params)
        g1 = math.gamma(a + 1.0)
        g2 = math.gamma(2.0 * a + 1.0)
        c = q * a / om
        em2 = (s + t) * g1 * g1 / g2 - q * a * (q * (2.0 - a) - 2.0 * s * om) / om ** 2
        fields.update(
            tau=t,
            EL=(s + nu) / g1,
            EL2=(s + t) / g2,
            EM2=em2,
            sn2_rate=sigma2 * g1 * g1 / (2.0 * a - 1.0),
            EL_martingale=(em - c) / g1,
            EL2_martingale=(em2 - 2.0 * c * em + c * c) / (g1 * g1),
        )
    return LimitConstants(**fields)


__all__ = [
    "ExactDistribution", "LimitConstants", "N_MAX", "TailValue", "cross_covariance",
    "eps2_mean", "exact_distribution", "limit_constants", "mean_M2", "mean_Sn",
    "moment_table", "position_sum_variance", "qsl_expectation", "second_moment_Sn", "tail_s2", "tau",
    "variance_Sn",
]
