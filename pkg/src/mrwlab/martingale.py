"""Martingale coordinates of a path.

M_n = a_n S_n - q A_n with M_0 = 0.  For k >= 2 the raw increment is
eps_k = S_k - (q + gamma_{k-1} S_{k-1}), gamma_k = 1 + a/k, and
M_k - M_{k-1} = a_k eps_k.  At k = 1 we take eps_1 = S_1 - q, which makes
the same identity hold but is not centered unless s = q: (M_n) is a
martingale from n = 1 on, with E[M_n] = s - q.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import oracle, process
from .errors import DomainError, RegimeError
from .report import EstimateWithCI, ExperimentReport, band_test


@dataclass(frozen=True, eq=False)
class MartingalePath:
    """M_0..M_n, eps_0..eps_n (eps_0 = 0 unused) and <M>_0..<M>_n."""

    n: int
    M: np.ndarray
    eps: np.ndarray
    bracket: np.ndarray


def _pi_sequence(path, params):
    # pi_k = q + a S_k / k for k = 1..n-1, the law of X_{k+1}
    S = path.positions
    k = np.arange(1, path.n, dtype=float)
    pi = params.q + params.a * S[1: path.n] / k
    assert np.all((pi >= -1e-12) & (pi <= 1 + 1e-12)), "step probability left [0, 1]"
    return pi


def _bracket_seq(path, params, an):
    pi = _pi_sequence(path, params)
    first = params.s - 2.0 * params.q * params.s + params.q ** 2
    out = np.zeros(path.n + 1)
    out[1] = first
    if path.n > 1:
        out[2:] = first + np.cumsum(an[2: path.n + 1] ** 2 * pi * (1.0 - pi))
    return out


def transform(path, params, table):
    table.require(path.n)
    n = path.n
    S = path.positions.astype(float)
    an = table.an[: n + 1]
    A = table.big_a[: n + 1]
    M = an * S - params.q * A
    M[0] = 0.0
    eps = np.zeros(n + 1)
    eps[1] = S[1] - params.q
    if n > 1:
        k = np.arange(1, n, dtype=float)
        eps[2:] = S[2:] - (params.q + (1.0 + params.a / k) * S[1:n])
    dM = np.diff(M)
    scale = 64.0 * np.finfo(float).eps * (1.0 + np.abs(M[1:]) + params.q * A[1:])
    if np.any(np.abs(dM - an[1:] * eps[1:]) > scale):
        raise AssertionError("increment identity M_k - M_{k-1} = a_k eps_k violated")
    return MartingalePath(n, M, eps, _bracket_seq(path, params, an))


@dataclass(frozen=True)
class ConditionalMoments:
    m2: float
    m3: float
    m4: float


def conditional_moments(params, s_n, n):
    """Central moments 2..4 of X_{n+1} given S_n = s_n."""
    pi = process.step_probability(params, s_n, n)
    p2 = pi * pi
    return ConditionalMoments(
        m2=pi - p2,
        m3=pi - 3.0 * p2 + 2.0 * p2 * pi,
        m4=pi - 4.0 * p2 + 6.0 * p2 * pi - 3.0 * p2 * p2,
    )


def bracket(path, params, table):
    """<M>_0..<M>_n; the k = 1 term is E[(S_1 - q)²] = s - 2qs + q²."""
    table.require(path.n)
    return _bracket_seq(path, params, table.an)


@dataclass(frozen=True)
class BracketDecomposition:
    v_n: float
    xi_n: float
    zeta_n: float
    bracket_value: float


def bracket_decomposition(path, params, table):
    """<M>_n = (s-q)(1-2q) + q(1-q) v_n + a(1-2q) xi_n - a² zeta_n."""
    n = path.n
    table.require(n)
    q, s, a = params.q, params.s, params.a
    x = path.positions[1:n] / np.arange(1, n, dtype=float)
    w = table.an[2: n + 1] ** 2
    xi = float(np.sum(w * x))
    zeta = float(np.sum(w * x * x))
    v = float(table.v[n])
    value = (s - q) * (1.0 - 2.0 * q) + q * (1.0 - q) * v + a * (1.0 - 2.0 * q) * xi - a * a * zeta
    return BracketDecomposition(v, xi, zeta, value)


def normalized_bracket_limit_check(params, n, replicas, master_seed, tolerance=0.05,
                                   level=0.99, workers=1):
    """Monte Carlo mean of <M>_n / n^(1-2a) against sigma² ell (a < 1/2)."""
    if params.a >= 0.5:
        raise RegimeError("the n^(1-2a) normalization applies for a < 1/2 only")
    if n < 2:
        raise DomainError("need n >= 2")
    t0 = time.perf_counter()
    rec = process.simulate_batch(params, n, replicas, master_seed,
                                 process.Recorder(bracket=True), workers=workers)
    ratio = rec.bracket / n ** (1.0 - 2.0 * params.a)
    lc = oracle.limit_constants(params)
    target = lc.sigma2 * lc.ell
    est = EstimateWithCI.mean_of(ratio, level)
    finite = oracle.mean_M2(params, n, "direct") / n ** (1.0 - 2.0 * params.a)
    res = band_test("normalized_bracket", est, target, tolerance,
                    note="E<M>_n = E[M_n²]; finite-n expectation in info")
    return ExperimentReport(
        "normalized_bracket", params.as_dict(), params.regime.value, n, replicas, master_seed,
        [res], time.perf_counter() - t0,
        info={"finite_n_expectation": finite, "exponent": 1.0 - 2.0 * params.a},
        samples={"bracket_ratio": ratio},
    )


__all__ = [
    "BracketDecomposition", "ConditionalMoments", "MartingalePath", "bracket",
    "bracket_decomposition", "conditional_moments", "normalized_bracket_limit_check",
    "transform",
]
