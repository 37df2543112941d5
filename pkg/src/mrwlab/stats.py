"""Monte Carlo checks of the limit theorems, one function per statement.

Each check simulates with :func:`mrwlab.process.simulate_batch`, compares
against the closed-form constants in :mod:`mrwlab.oracle` and returns an
:class:`~mrwlab.report.ExperimentReport`.  Band tolerances default to the
values in :data:`TOLERANCES`; p-value tests use ``ks_level``.

mu = q/(1-a) throughout.
"""

import dataclasses
import math
import time

import numpy as np
from scipy import stats as _st

from . import oracle, process
from .martingale import normalized_bracket_limit_check
from .errors import DegenerateError, DomainError, RegimeError
from .process import Recorder, Regime, simulate_batch
from .report import (
    EstimateWithCI, ExperimentReport, PASS, FAIL, advisory, band_test, ceiling_test,
    pvalue_test, threshold_test,
)

TOLERANCES = {
    "clt_diffusive": {"var_tol": 0.03},
    "clt_critical": {"var_tol": 0.08},
    "qsl_diffusive": {"tol": 0.15},
    "qsl_critical": {"tol": 0.30},
    "fclt_covariance": {"tol": 0.07},
    "cm_checks": {"mean_tol": 0.01, "var_tol_diffusive": 0.07, "var_tol_critical": 0.10},
    "superdiffusive_L": {"mean_tol": 0.02, "m2_tol": 0.03},
    "fluctuation_gaussianity": {"var_tol": 0.10},
    "normalized_bracket": {"tolerance": 0.05},
}
KS_LEVEL = 0.01
CORR_THRESHOLD = 0.99


# --------------------------------------------------------------------------
# helpers


def _require(params, *regimes):
    if params.regime not in regimes:
        names = ", ".join(r.value for r in regimes)
        raise RegimeError(f"a={params.a!r} is {params.regime.value}; this check needs {names}")


def _require_positive(value, what):
    if not value > 0:
        raise DegenerateError(f"{what} = {value}: the normalized statistic is degenerate")


def _variance_estimate(x, level, center=None):
    """Sample variance with a delta-method standard error."""
    x = np.asarray(x, float)
    m = x.mean() if center is None else center
    d = x - m
    var = float(np.sum(d * d) / (x.size - (1 if center is None else 0)))
    m4 = float(np.mean(d ** 4))
    se = math.sqrt(max(m4 - var * var, 0.0) / x.size)
    return EstimateWithCI.normal(var, se, x.size, level)


def _median_estimate(x, level):
    """Median with a distribution-free order-statistic interval."""
    x = np.sort(np.asarray(x, float))
    n = x.size
    med = float(np.median(x))
    # [x_(j), x_(n-j+1)] in 1-based order statistics
    j = int(_st.binom.ppf((1.0 - level) / 2.0, n, 0.5))
    lo = min(float(x[max(j - 1, 0)]), med)
    hi = max(float(x[min(n - j, n - 1)]), med)
    z = float(_st.norm.ppf(0.5 + level / 2.0))
    return EstimateWithCI(med, (hi - lo) / (2.0 * z), (lo, hi), n, level)


def _batch(params, n, replicas, seed, recorder, workers, sampler):
    return simulate_batch(params, n, replicas, seed, recorder, workers=workers, sampler=sampler)


def _report(name, params, n, replicas, seed, tests, t0, info=None, samples=None):
    return ExperimentReport(name, params.as_dict(), params.regime.value, int(n), int(replicas),
                            int(seed), list(tests), time.perf_counter() - t0, info or {},
                            samples or {})


def log_grid(lo, hi, count):
    """About ``count`` distinct integers log-spaced on [lo, hi], hi included."""
    g = np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))
    return tuple(int(k) for k in g)


# --------------------------------------------------------------------------
# normality


def normality_test(samples, mean, variance, level=KS_LEVEL, name="ks_normal"):
    """One-sample KS against N(mean, variance), asymptotic Kolmogorov p-value."""
    x = np.asarray(samples, float)
    if x.size < 100:
        raise DomainError(f"KS test needs at least 100 samples, got {x.size}")
    if not variance > 0:
        raise DegenerateError("null variance must be positive")
    res = _st.kstest(x, "norm", args=(float(mean), math.sqrt(variance)), method="asymp")
    return pvalue_test(name, res.statistic, res.pvalue, EstimateWithCI.mean_of(x), mean, level,
                       note=f"null N({mean!r}, {variance!r})")


def chi_square_gof(values, pmf, min_expected=5.0):
    """Pearson chi-square of integer samples against an exact pmf on {0..n}.

    Cells with expected count below ``min_expected`` are pooled into one
    cell.  A sample landing where the pmf is exactly zero gives p = 0.
    Returns (statistic, p_value, degrees_of_freedom).
    """
    pmf = np.asarray(pmf, float)
    values = np.asarray(values, np.int64)
    if values.min() < 0 or values.max() >= pmf.size:
        return math.inf, 0.0, 0
    obs = np.bincount(values, minlength=pmf.size).astype(float)
    if np.any(obs[pmf == 0] > 0):
        return math.inf, 0.0, 0
    exp = pmf * values.size
    big = exp >= min_expected
    o, e = list(obs[big]), list(exp[big])
    if np.any(~big) and exp[~big].sum() > 0:
        o.append(obs[~big].sum())
        e.append(exp[~big].sum())
    if len(o) < 2:
        return 0.0, 1.0, 0
    e = np.asarray(e)
    e *= values.size / e.sum()
    res = _st.chisquare(np.asarray(o), e)
    return float(res.statistic), float(res.pvalue), len(o) - 1


# --------------------------------------------------------------------------
# strong law


def slln_check(params, n_grid, replicas, seed, level=0.99, workers=1, sampler="collapsed"):
    """Mean |S_n/n - mu| along ``n_grid``.

    Two verdicts: the error decreases along the grid (up to 3 standard
    errors of slack per step), and the final error does not exceed the
    exact root-mean-square error by more than 3 standard errors (Jensen).
    """
    t0 = time.perf_counter()
    grid = tuple(sorted(set(int(k) for k in n_grid)))
    if len(grid) < 2:
        raise DomainError("n_grid needs at least two distinct times")
    n = grid[-1]
    rec = _batch(params, n, replicas, seed, Recorder(checkpoints=grid), workers, sampler)
    mu = params.limit_mean
    err = np.abs(rec.positions / np.asarray(grid, float) - mu)
    means = err.mean(axis=0)
    ses = err.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros(len(grid))
    es, es2 = oracle.moment_table(params, n)
    g = np.asarray(grid)
    rms = np.sqrt(np.maximum(es2[g] - 2.0 * mu * g * es[g] + (mu * g) ** 2, 0.0)) / g
    ok = [means[i + 1] <= means[i] + 3.0 * math.hypot(ses[i], ses[i + 1])
          for i in range(len(grid) - 1)]
    frac = float(np.mean(ok))
    final = EstimateWithCI.normal(means[-1], ses[-1], replicas, level)
    tests = [
        threshold_test("slln_decreasing", frac, 1.0, final, 0.0,
                       note="fraction of grid steps where the mean error does not grow"),
        ceiling_test("slln_rate", means[-1] - 3.0 * ses[-1], rms[-1], final, 0.0,
                     note="final mean error (minus 3 s.e.) vs exact RMS error"),
    ]
    return _report("slln_check", params, n, replicas, seed, tests, t0,
                   info={"n_grid": list(grid), "mean_abs_error": means, "stderr": ses,
                         "exact_rms_error": rms, "limit": mu},
                   samples={"abs_error": (grid, err)})


# --------------------------------------------------------------------------
# central limit theorems


def _clt(name, params, n, replicas, seed, scale, target, var_tol, ks_level, level, workers,
         sampler, note):
    t0 = time.perf_counter()
    rec = _batch(params, n, replicas, seed, process.final_position(n), workers, sampler)
    mu = params.limit_mean
    z = scale * (rec.final / n - mu)
    est = _variance_estimate(z, level)
    finite = scale ** 2 * oracle.variance_Sn(params, n) / n ** 2
    tests = [
        band_test(f"{name}_variance", est, target, var_tol, note=note),
        normality_test(z, 0.0, target, ks_level, name=f"{name}_ks"),
    ]
    return _report(name, params, n, replicas, seed, tests, t0,
                   info={"finite_n_variance": finite, "scale": scale, "sample_mean": z.mean()},
                   samples={"standardized": ((n,), z[:, None])})


def clt_diffusive(params, n, replicas, seed, var_tol=TOLERANCES["clt_diffusive"]["var_tol"],
                  ks_level=KS_LEVEL, level=0.99, workers=1, sampler="collapsed"):
    """sqrt(n)(S_n/n - mu) against N(0, sigma²/(1-2a))."""
    _require(params, Regime.DIFFUSIVE)
    lc = oracle.limit_constants(params)
    _require_positive(lc.sigma2, "sigma²")
    return _clt("clt_diffusive", params, n, replicas, seed, math.sqrt(n),
                lc.sigma2 / (1.0 - 2.0 * params.a), var_tol, ks_level, level, workers, sampler,
                "target sigma²/(1-2a)")


def clt_critical(params, n, replicas, seed, var_tol=TOLERANCES["clt_critical"]["var_tol"],
                 ks_level=KS_LEVEL, level=0.99, workers=1, sampler="collapsed"):
    """sqrt(n/log n)(S_n/n - 2q) against N(0, 4q(1-p)); log-rate, wide band."""
    _require(params, Regime.CRITICAL)
    target = 4.0 * params.q * (1.0 - params.p)
    _require_positive(target, "4q(1-p)")
    if n < 3:
        raise DomainError("need n >= 3 so that log n > 1")
    return _clt("clt_critical", params, n, replicas, seed, math.sqrt(n / math.log(n)), target,
                var_tol, ks_level, level, workers, sampler,
                "target 4q(1-p); slow-convergence check (log rate)")


# --------------------------------------------------------------------------
# quadratic strong laws


def _qsl(name, params, n, replicas, seed, kind, norm, target, tol, level, workers, sampler,
         note):
    t0 = time.perf_counter()
    mu = params.limit_mean
    rec = _batch(params, n, replicas, seed, Recorder(quadratic=(mu, kind)), workers, sampler)
    stat = rec.quadratic / norm
    med = _median_estimate(stat, level)
    mean = EstimateWithCI.mean_of(stat, level)
    tests = [
        band_test(f"{name}_median", med, target, tol, note=note),
        advisory(f"{name}_mean", abs(mean.value - target) / target if target else 0.0, mean,
                 target, note="mean over paths, reported only"),
    ]
    return _report(name, params, n, replicas, seed, tests, t0,
                   info={"normalizer": norm,
                         "finite_n_expectation": oracle.qsl_expectation(params, n)},
                   samples={"statistic": ((n,), stat[:, None])})


def qsl_diffusive(params, n, replicas, seed, tol=TOLERANCES["qsl_diffusive"]["tol"],
                  level=0.99, workers=1, sampler="collapsed"):
    """(1/log n) sum_{k<=n} (S_k/k - mu)² against sigma²/(1-2a)."""
    _require(params, Regime.DIFFUSIVE)
    if n < 2:
        raise DomainError("need n >= 2")
    lc = oracle.limit_constants(params)
    return _qsl("qsl_diffusive", params, n, replicas, seed, "diffusive", math.log(n),
                lc.sigma2 / (1.0 - 2.0 * params.a), tol, level, workers, sampler,
                "per-path statistic, median over paths; log-rate convergence")


def qsl_critical(params, n, replicas, seed, tol=TOLERANCES["qsl_critical"]["tol"], level=0.99,
                 workers=1, sampler="collapsed"):
    """(1/log log n) sum_{k=2}^n (S_k/k - 2q)²/(log k)² against 4q(1-p)."""
    _require(params, Regime.CRITICAL)
    if n < 16:
        raise DomainError("need n >= 16 so that log log n is meaningfully positive")
    return _qsl("qsl_critical", params, n, replicas, seed, "critical",
                math.log(math.log(n)), 4.0 * params.q * (1.0 - params.p), tol, level, workers,
                sampler, "slow-convergence check (log log rate); k=1 term excluded")


# --------------------------------------------------------------------------
# iterated logarithm (advisory)


def _lil_scale(params, k):
    k = np.asarray(k, float)
    if params.regime is Regime.DIFFUSIVE:
        return np.sqrt(k / (2.0 * np.log(np.log(k))))
    return np.sqrt(k / (2.0 * np.log(k) * np.log(np.log(np.log(k)))))


def lil_monitor(params, n, replicas, seed, checkpoints=None, delta=0.1, cap=2.0, level=0.99,
                workers=1, sampler="collapsed"):
    """Track T_k / envelope along log-spaced checkpoints; never fails.

    Diffusive: T_k = (k/(2 log log k))^(1/2) |S_k/k - mu|, envelope
    sigma/sqrt(1-2a).  Critical: T_k = (k/(2 log k log log log k))^(1/2)
    |S_k/k - 2q|, envelope sqrt(4q(1-p)).
    """
    _require(params, Regime.DIFFUSIVE, Regime.CRITICAL)
    t0 = time.perf_counter()
    first = 100 if params.regime is Regime.DIFFUSIVE else 1000
    if n < first:
        raise DomainError(f"need n >= {first} for a meaningful envelope")
    ck = log_grid(first, n, 60) if checkpoints is None else tuple(sorted(set(checkpoints)))
    if ck[0] < first:
        raise DomainError(f"checkpoints must start at {first} or later")
    rec = _batch(params, n, replicas, seed, Recorder(checkpoints=ck), workers, sampler)
    lc = oracle.limit_constants(params)
    if params.regime is Regime.DIFFUSIVE:
        env = math.sqrt(lc.sigma2 / (1.0 - 2.0 * params.a))
    else:
        env = math.sqrt(4.0 * params.q * (1.0 - params.p))
    kk = np.asarray(ck, float)
    T = _lil_scale(params, kk) * np.abs(rec.positions / kk - params.limit_mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(T == 0, 0.0, T / env) if env > 0 else np.where(T == 0, 0.0, np.inf)
    run_max = ratio.max(axis=1)
    inside = float(np.mean(ratio <= 1.0 + delta))
    below_cap = float(np.mean(run_max < cap))
    tests = [
        advisory("lil_running_max", float(np.median(run_max)),
                 _median_estimate(run_max, level) if replicas >= 2 else
                 EstimateWithCI.normal(run_max[0], 0.0, 1, level), 1.0,
                 note="median over paths of max_k T_k/envelope"),
        advisory("lil_inside_fraction", inside, EstimateWithCI.normal(inside, 0.0, replicas),
                 1.0, note=f"fraction of checkpoints with T_k <= envelope*(1+{delta})"),
        advisory("lil_terminal_ratio", float(np.median(ratio[:, -1])),
                 EstimateWithCI.mean_of(ratio[:, -1], level) if replicas >= 2 else
                 EstimateWithCI.normal(ratio[0, -1], 0.0, 1, level), 1.0,
                 note="T_n/envelope at the horizon"),
        advisory("lil_paths_below_cap", below_cap,
                 EstimateWithCI.normal(below_cap, 0.0, replicas), 1.0,
                 note=f"fraction of paths with T_k/envelope < {cap} at every checkpoint"),
    ]
    return _report("lil_monitor", params, n, replicas, seed, tests, t0,
                   info={"envelope": env, "checkpoints": list(ck), "cap": cap,
                         "paths_below_cap": below_cap,
                         "advisory": "the limsup statement cannot be verified at finite n"},
                   samples={"envelope_ratio": (ck, ratio)})


# --------------------------------------------------------------------------
# functional CLT: covariance structure


def fclt_covariance(params, t_grid, n, replicas, seed, tol=TOLERANCES["fclt_covariance"]["tol"],
                    level=0.99, workers=1, sampler="collapsed"):
    """Covariance of W_t = sqrt(n)(S_[nt]/[nt] - mu) against
    sigma²/((1-2a) t) (t/s)^a, s <= t, entry by entry."""
    _require(params, Regime.DIFFUSIVE)
    lc = oracle.limit_constants(params)
    _require_positive(lc.sigma2, "sigma²")
    t0 = time.perf_counter()
    ts = sorted(float(t) for t in t_grid)
    if not all(0.0 < t <= 1.0 for t in ts):
        raise DomainError("t_grid must lie in (0, 1]")
    ks = [int(math.floor(n * t)) for t in ts]
    if ks[0] < 1 or len(set(ks)) != len(ks):
        raise DomainError("t_grid too fine for this n")
    rec = _batch(params, n, replicas, seed, Recorder(checkpoints=ks), workers, sampler)
    W = math.sqrt(n) * (rec.positions / np.asarray(ks, float) - params.limit_mean)
    D = W - W.mean(axis=0)
    a = params.a
    tests = []
    emp = np.empty((len(ts), len(ts)))
    tgt = np.empty_like(emp)
    for i in range(len(ts)):
        for j in range(i, len(ts)):
            s_, t_ = ts[i], ts[j]
            target = lc.sigma2 / ((1.0 - 2.0 * a) * t_) * (t_ / s_) ** a
            prod = D[:, i] * D[:, j]
            value = float(prod.sum() / (replicas - 1))
            se = float(prod.std(ddof=1) / math.sqrt(replicas))
            est = EstimateWithCI.normal(value, se, replicas, level)
            emp[i, j] = emp[j, i] = value
            tgt[i, j] = tgt[j, i] = target
            tests.append(band_test(f"fclt_cov[{s_!r},{t_!r}]", est, target, tol))
    exact = np.empty_like(emp)
    for i in range(len(ks)):
        for j in range(i, len(ks)):
            exact[i, j] = exact[j, i] = n * oracle.cross_covariance(params, ks[i], ks[j]) / (
                ks[i] * ks[j])
    return _report("fclt_covariance", params, n, replicas, seed, tests, t0,
                   info={"t_grid": ts, "empirical": emp, "target": tgt,
                         "finite_n_exact": exact},
                   samples={"W": (tuple(ks), W)})


# --------------------------------------------------------------------------
# center of mass


def center_of_mass(path):
    """G_n = (S_1 + ... + S_n)/n."""
    return float(path.positions[1:].sum() / path.n)


def cm_checks(params, n, replicas, seed, mean_tol=TOLERANCES["cm_checks"]["mean_tol"],
              var_tol=None, corr_threshold=CORR_THRESHOLD, level=0.99, workers=1,
              sampler="collapsed"):
    """Center-of-mass laws, dispatched on the regime.

    diffusive: G_n/n -> mu/2 and sqrt(n)(G_n/n - mu/2) has variance
    2 sigma²/(3(1-2a)(2-a)); critical: sqrt(n/log n)(G_n/n - mu/2) has
    variance 16q(1-p)/9; superdiffusive: n^(1-a)(G_n/n - mu/2) is
    asymptotically L/(1+a), checked by its correlation with L_n/(1+a).
    """
    t0 = time.perf_counter()
    reg = params.regime
    rec = _batch(params, n, replicas, seed,
                 Recorder(checkpoints=(n,), position_sum=True), workers, sampler)
    mu = params.limit_mean
    g = rec.position_sum / n / n
    lc = oracle.limit_constants(params)
    tests, info = [], {}
    if reg is Regime.SUPERDIFFUSIVE:
        x = n ** (1.0 - params.a) * (g - mu / 2.0)
        y = n ** (1.0 - params.a) * (rec.final / n - mu) / (1.0 + params.a)
        if np.std(x) == 0 or np.std(y) == 0:
            raise DegenerateError("constant statistic; correlation undefined")
        r = float(np.corrcoef(x, y)[0, 1])
        # Fisher-z interval for the correlation
        z = math.atanh(min(r, 1 - 1e-15))
        zq = float(_st.norm.ppf(0.5 + level / 2.0))
        se_z = 1.0 / math.sqrt(max(replicas - 3, 1))
        est = EstimateWithCI(r, se_z * (1 - r * r), (math.tanh(z - zq * se_z),
                                                     min(math.tanh(z + zq * se_z), 1.0)),
                             replicas, level)
        tests.append(threshold_test("cm_correlation", r, corr_threshold, est, 1.0,
                                    note="corr(n^(1-a)(G_n/n - mu/2), L_n/(1+a))"))
        samples = {"cm_scaled": ((n,), x[:, None]), "L_over_1pa": ((n,), y[:, None])}
    else:
        if reg is Regime.DIFFUSIVE:
            scale = math.sqrt(n)
            target = 2.0 * lc.sigma2 / (3.0 * (1.0 - 2.0 * params.a) * (2.0 - params.a))
            tol = TOLERANCES["cm_checks"]["var_tol_diffusive"] if var_tol is None else var_tol
        else:
            if n < 3:
                raise DomainError("need n >= 3")
            scale = math.sqrt(n / math.log(n))
            target = 16.0 * params.q * (1.0 - params.p) / 9.0
            tol = TOLERANCES["cm_checks"]["var_tol_critical"] if var_tol is None else var_tol
        _require_positive(target, "center-of-mass variance")
        yv = scale * (g - mu / 2.0)
        if reg is Regime.DIFFUSIVE:
            tests.append(band_test("cm_mean", EstimateWithCI.mean_of(g, level), mu / 2.0,
                                   mean_tol, note="G_n/n against mu/2"))
        tests.append(band_test("cm_variance", _variance_estimate(yv, level), target, tol))
        info["finite_n_variance"] = scale ** 2 * oracle.position_sum_variance(params, n) / n ** 4
        samples = {"cm_scaled": ((n,), yv[:, None])}
    return _report("cm_checks", params, n, replicas, seed, tests, t0, info=info, samples=samples)


# --------------------------------------------------------------------------
# superdiffusive regime


def _l_hat(params, k, s_k):
    k = np.asarray(k, float)
    return k ** (1.0 - params.a) * (s_k / k - params.limit_mean)


def superdiffusive_L(params, n, replicas, seed,
                     mean_tol=TOLERANCES["superdiffusive_L"]["mean_tol"],
                     m2_tol=TOLERANCES["superdiffusive_L"]["m2_tol"], gap_grid=None,
                     level=0.99, workers=1, sampler="collapsed"):
    """Moments of L_n = n^(1-a)(S_n/n - mu) against E[L], E[L²].

    Also checks that the mean-square gap E[(L_k - L_n)²] shrinks as k
    grows towards n along ``gap_grid`` (default n/1000, n/100, n/10).
    """
    _require(params, Regime.SUPERDIFFUSIVE)
    t0 = time.perf_counter()
    if gap_grid is None:
        gap_grid = [k for k in (n // 1000, n // 100, n // 10) if k >= 1]
    grid = tuple(sorted(set(int(k) for k in gap_grid if 1 <= k < n)))
    ck = grid + (n,)
    rec = _batch(params, n, replicas, seed, Recorder(checkpoints=ck), workers, sampler)
    L = _l_hat(params, np.asarray(ck), rec.positions)
    Ln = L[:, -1]
    lc = oracle.limit_constants(params)
    tests = [
        band_test("L_mean", EstimateWithCI.mean_of(Ln, level), lc.EL, mean_tol,
                  note="target (s+nu)/Gamma(a+1)"),
        band_test("L_second_moment", EstimateWithCI.mean_of(Ln * Ln, level), lc.EL2, m2_tol,
                  note="target (s+tau)/Gamma(2a+1)"),
    ]
    gaps, gses = [], []
    for j in range(len(grid)):
        d2 = (L[:, j] - Ln) ** 2
        gaps.append(float(d2.mean()))
        gses.append(float(d2.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0)
    if len(grid) >= 2:
        ok = [gaps[j + 1] <= gaps[j] + 3.0 * math.hypot(gses[j], gses[j + 1])
              for j in range(len(grid) - 1)]
        frac = float(np.mean(ok))
        tests.append(threshold_test(
            "L_gap_decreasing", frac, 1.0,
            EstimateWithCI.normal(gaps[-1], gses[-1], replicas, level), 0.0,
            note="E[(L_k - L_n)²] along the grid; empirical L² convergence proxy"))
    return _report("superdiffusive_L", params, n, replicas, seed, tests, t0,
                   info={"gap_grid": list(grid), "gaps": gaps, "gap_stderr": gses,
                         "EL": lc.EL, "EL2": lc.EL2, "finite_n_mean": float(
                             _l_hat(params, n, oracle.mean_Sn(params, n)))},
                   samples={"L_hat": (ck, L)})


def fluctuation_gaussianity(params, n_inner, n_outer, replicas, seed,
                            var_tol=TOLERANCES["fluctuation_gaussianity"]["var_tol"],
                            ks_level=KS_LEVEL, proxy_correction=True, level=0.99, workers=1,
                            sampler="collapsed"):
    """F = n_i^((2a-1)/2) (L_{n_i} - L_{n_o}) against N(0, sigma²/(2a-1)).

    L itself is not observable, so the same path is continued to n_o and
    L_{n_o} stands in for it.  That proxy removes the share
    kappa = 1 - s²_{n_o+1}/s²_{n_i+1} of the fluctuation variance, with s²
    the exact tail :func:`mrwlab.oracle.tail_s2`, so with
    ``proxy_correction`` the variance is compared as Var(F)/kappa and the
    KS test runs on F/sqrt(kappa).  ``n_outer=None`` means 100 n_inner.
    """
    _require(params, Regime.SUPERDIFFUSIVE)
    lc = oracle.limit_constants(params)
    _require_positive(lc.sigma2, "sigma²")
    n_outer = 100 * n_inner if n_outer is None else int(n_outer)
    if not 1 <= n_inner < n_outer:
        raise DomainError("need 1 <= n_inner < n_outer")
    t0 = time.perf_counter()
    rec = _batch(params, n_outer, replicas, seed, Recorder(checkpoints=(n_inner, n_outer)),
                 workers, sampler)
    L = _l_hat(params, np.array([n_inner, n_outer]), rec.positions)
    e = 2.0 * params.a - 1.0
    F = n_inner ** (e / 2.0) * (L[:, 0] - L[:, 1])
    target = lc.sigma2 / e
    ti = oracle.tail_s2(params, n_inner + 1)
    to = oracle.tail_s2(params, n_outer + 1)
    kappa = 1.0 - to / ti if proxy_correction else 1.0
    G = F / math.sqrt(kappa)
    est = _variance_estimate(G, level)
    raw = _variance_estimate(F, level)
    tests = [
        band_test("fluctuation_variance", est, target, var_tol,
                  note=f"Var(F)/kappa, kappa={kappa!r}" if proxy_correction else "Var(F)"),
        normality_test(G, 0.0, target, ks_level, name="fluctuation_ks"),
        advisory("fluctuation_ks_estimated_variance",
                 float(_st.kstest(G, "norm", args=(G.mean(), G.std(ddof=1)),
                                  method="asymp").pvalue),
                 est, target, note="KS p-value with estimated mean and variance"),
    ]
    return _report("fluctuation_gaussianity", params, n_inner, replicas, seed, tests, t0,
                   info={"n_outer": n_outer, "kappa": kappa, "proxy_deflation": 1.0 - kappa,
                         "raw_variance": raw.value,
                         "raw_relative_error": (raw.value - target) / target,
                         "tail_inner": ti, "tail_outer": to},
                   samples={"F": ((n_inner,), F[:, None])})


# --------------------------------------------------------------------------
# suite


def _bonferroni(tests):
    m = sum(1 for t in tests if t.rule == "pvalue")
    if m <= 1:
        return tests, m
    out = []
    for t in tests:
        if t.rule == "pvalue":
            lvl = t.tolerance / m
            t = dataclasses.replace(t, tolerance=lvl,
                                    verdict=PASS if t.p_value >= lvl else FAIL,
                                    note=(t.note + f"; Bonferroni m={m}").lstrip("; "))
        out.append(t)
    return out, m


def scaled(name, scale):
    """Band tolerances of check ``name`` multiplied by ``scale``."""
    return {k: v * scale for k, v in TOLERANCES.get(name, {}).items()}


def suite(params, n, replicas, seed, workers=1, tolerance_scale=1.0, sampler="collapsed"):
    """Every check that applies to the regime, at horizon n.

    p-value verdicts are Bonferroni-adjusted across the suite.
    """
    sigma2 = oracle.limit_constants(params).sigma2
    _require_positive(sigma2, "sigma²")
    t0 = time.perf_counter()
    kw = dict(workers=workers, sampler=sampler)
    sc = tolerance_scale
    grid = sorted({max(n // 100, 1), max(n // 10, 2), n})
    runs = [slln_check(params, grid, replicas, seed, **kw)]
    reg = params.regime
    if reg is Regime.DIFFUSIVE:
        runs += [
            clt_diffusive(params, n, replicas, seed, **scaled("clt_diffusive", sc), **kw),
            qsl_diffusive(params, n, replicas, seed, **scaled("qsl_diffusive", sc), **kw),
            fclt_covariance(params, (0.25, 0.5, 1.0), n, replicas, seed,
                            **scaled("fclt_covariance", sc), **kw),
        ]
    elif reg is Regime.CRITICAL:
        runs += [
            clt_critical(params, n, replicas, seed, **scaled("clt_critical", sc), **kw),
            qsl_critical(params, max(n, 16), replicas, seed, **scaled("qsl_critical", sc), **kw),
        ]
    else:
        runs += [
            superdiffusive_L(params, n, replicas, seed, **scaled("superdiffusive_L", sc), **kw),
            fluctuation_gaussianity(params, max(n // 100, 1), n, replicas, seed,
                                    **scaled("fluctuation_gaussianity", sc), **kw),
        ]
    cm = scaled("cm_checks", sc)
    cm_kw = {"mean_tol": cm["mean_tol"]}
    if reg is Regime.DIFFUSIVE:
        cm_kw["var_tol"] = cm["var_tol_diffusive"]
    elif reg is Regime.CRITICAL:
        cm_kw["var_tol"] = cm["var_tol_critical"]
    runs.append(cm_checks(params, n, replicas, seed, **cm_kw, **kw))
    if reg is not Regime.SUPERDIFFUSIVE and n >= (100 if reg is Regime.DIFFUSIVE else 1000):
        runs.append(lil_monitor(params, n, replicas, seed, **kw))
    tests = [dataclasses.replace(t, name=f"{r.experiment}/{t.name}") for r in runs for t in r.tests]
    tests, m = _bonferroni(tests)
    return ExperimentReport(
        "suite", params.as_dict(), reg.value, n, replicas, seed, tests,
        time.perf_counter() - t0,
        info={"bonferroni_m": m, "tolerance_scale": sc,
              "experiments": {r.experiment: r.info for r in runs}},
        samples={f"{r.experiment}/{k}": v for r in runs for k, v in r.samples.items()},
    )


REGIMES = {
    "slln_check": tuple(Regime),
    "clt_diffusive": (Regime.DIFFUSIVE,),
    "clt_critical": (Regime.CRITICAL,),
    "qsl_diffusive": (Regime.DIFFUSIVE,),
    "qsl_critical": (Regime.CRITICAL,),
    "lil_monitor": (Regime.DIFFUSIVE, Regime.CRITICAL),
    "fclt_covariance": (Regime.DIFFUSIVE,),
    "cm_checks": tuple(Regime),
    "superdiffusive_L": (Regime.SUPERDIFFUSIVE,),
    "fluctuation_gaussianity": (Regime.SUPERDIFFUSIVE,),
    "normalized_bracket": (Regime.DIFFUSIVE,),
    "suite": tuple(Regime),
}


def run_experiment(name, params, n, replicas, seed, workers=1, tolerance_scale=1.0,
                   n_grid=None, t_grid=None, n_outer=None, ks_level=KS_LEVEL,
                   sampler="collapsed"):
    """Dispatch by name with scaled default tolerances."""
    if name not in REGIMES:
        raise DomainError(f"unknown experiment {name!r}; choose from {sorted(REGIMES)}")
    _require(params, *REGIMES[name])
    kw = dict(workers=workers, sampler=sampler)
    tol = scaled(name, tolerance_scale)
    if name == "suite":
        return suite(params, n, replicas, seed, workers=workers,
                     tolerance_scale=tolerance_scale, sampler=sampler)
    if name == "slln_check":
        grid = n_grid or sorted({max(n // 100, 1), max(n // 10, 2), n})
        return slln_check(params, grid, replicas, seed, **kw)
    if name == "fclt_covariance":
        return fclt_covariance(params, t_grid or (0.25, 0.5, 1.0), n, replicas, seed, **tol, **kw)
    if name == "fluctuation_gaussianity":
        return fluctuation_gaussianity(params, n, n_outer, replicas, seed, ks_level=ks_level,
                                       **tol, **kw)
    if name == "cm_checks":
        key = {Regime.DIFFUSIVE: "var_tol_diffusive", Regime.CRITICAL: "var_tol_critical"}
        extra = {"var_tol": tol[key[params.regime]]} if params.regime in key else {}
        return cm_checks(params, n, replicas, seed, mean_tol=tol["mean_tol"], **extra, **kw)
    if name == "normalized_bracket":
        return normalized_bracket_limit_check(params, n, replicas, seed, workers=workers, **tol)
    if name in ("clt_diffusive", "clt_critical"):
        tol["ks_level"] = ks_level
    return EXPERIMENTS[name](params, n, replicas, seed, **tol, **kw)


EXPERIMENTS = {
    "slln_check": slln_check,
    "clt_diffusive": clt_diffusive,
    "clt_critical": clt_critical,
    "qsl_diffusive": qsl_diffusive,
    "qsl_critical": qsl_critical,
    "lil_monitor": lil_monitor,
    "fclt_covariance": fclt_covariance,
    "cm_checks": cm_checks,
    "superdiffusive_L": superdiffusive_L,
    "fluctuation_gaussianity": fluctuation_gaussianity,
}

__all__ = [
    "CORR_THRESHOLD", "EXPERIMENTS", "KS_LEVEL", "REGIMES", "TOLERANCES", "center_of_mass",
    "chi_square_gof", "cm_checks", "clt_critical", "clt_diffusive", "fclt_covariance",
    "fluctuation_gaussianity", "lil_monitor", "log_grid", "normality_test", "qsl_critical",
    "qsl_diffusive", "run_experiment", "scaled", "slln_check", "suite", "superdiffusive_L",
]
