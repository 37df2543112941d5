"""Command-line front end.

    mrwlab run    --experiment clt_diffusive --p 0.5 --q 0.5 --s 0.5 --n 100000 ...
    mrwlab suite  --p ... --seed 1 --out results/
    mrwlab oracle --p ... --n 50 --out oracle/
    mrwlab trace  --p ... --n 100000 --seed 3 --out trace/

A flat TOML file given with ``--config`` supplies defaults; flags override
it.  Exit status: 0 every verdict passed, 1 some verdict failed, 2 invalid
configuration or degenerate parameters.
"""

import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import martingale, oracle, sequences, stats
from .errors import ConfigError, MRWError
from .process import Regime, RngStream, WalkParams, simulate_collapsed
from .serialize import VERSION, results_document, write_json, write_rows, write_samples_csv

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class ExperimentConfig:
    p: float = None
    q: float = None
    s: float = None
    experiment: str = None
    n: int = None
    replicas: int = 1000
    seed: int = None
    n_grid: list = None
    t_grid: list = None
    n_outer: int = None
    tolerance_scale: float = 1.0
    ks_level: float = stats.KS_LEVEL
    out: str = "."
    workers: int = 1
    sampler: str = "collapsed"

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def echo(self):
        return {k: getattr(self, k) for k in self.keys() if k not in ("out", "workers")}

    def params(self):
        for k in ("p", "q", "s"):
            if getattr(self, k) is None:
                raise ConfigError(f"missing parameter {k}")
        return WalkParams(self.p, self.q, self.s)


def _as_int(name, v, low=1):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    try:
        v = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {v!r}") from None
    if v < low:
        raise ConfigError(f"{name} must be >= {low}, got {v}")
    return v


def load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    allowed = set(ExperimentConfig.keys())
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; tables found: {', '.join(nested)}")
    return raw


def build_config(args, command):
    values = load_config(args.config) if args.config else {}
    for k in ExperimentConfig.keys():
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    cfg = ExperimentConfig(**values)
    if command == "suite":
        cfg.experiment = "suite"
        if cfg.seed is None:
            raise ConfigError("suite mode requires an explicit --seed")
    if command in ("run", "suite", "oracle", "trace") and cfg.n is None:
        raise ConfigError("missing n")
    cfg.n = _as_int("n", cfg.n)
    cfg.replicas = _as_int("replicas", cfg.replicas)
    cfg.workers = _as_int("workers", cfg.workers)
    cfg.seed = 0 if cfg.seed is None else _as_int("seed", cfg.seed, low=0)
    if cfg.n_outer is not None:
        cfg.n_outer = _as_int("n_outer", cfg.n_outer)
    if cfg.n_grid is not None:
        cfg.n_grid = [_as_int("n_grid", k) for k in cfg.n_grid]
    if cfg.t_grid is not None:
        cfg.t_grid = [float(t) for t in cfg.t_grid]
    if not (isinstance(cfg.tolerance_scale, (int, float)) and cfg.tolerance_scale > 0):
        raise ConfigError("tolerance_scale must be a positive number")
    if cfg.sampler not in ("collapsed", "full_memory"):
        raise ConfigError(f"unknown sampler {cfg.sampler!r}")
    if command == "run":
        if cfg.experiment is None:
            raise ConfigError("run needs --experiment")
        if cfg.experiment not in stats.REGIMES:
            raise ConfigError(f"unknown experiment {cfg.experiment!r}; "
                              f"choose from {', '.join(sorted(stats.REGIMES))}")
    return cfg


def _check_regime(cfg, params):
    allowed = stats.REGIMES[cfg.experiment]
    if params.regime not in allowed:
        raise ConfigError(
            f"{cfg.experiment} needs regime {'/'.join(r.value for r in allowed)}, "
            f"but a={params.a!r} is {params.regime.value}")


# --------------------------------------------------------------------------
# commands


def cmd_run(cfg):
    params = cfg.params()
    _check_regime(cfg, params)
    report = stats.run_experiment(
        cfg.experiment, params, cfg.n, cfg.replicas, cfg.seed, workers=cfg.workers,
        tolerance_scale=cfg.tolerance_scale, n_grid=cfg.n_grid, t_grid=cfg.t_grid,
        n_outer=cfg.n_outer, ks_level=cfg.ks_level, sampler=cfg.sampler)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{cfg.experiment}.json", results_document(report, cfg.echo()))
    write_samples_csv(out / f"{cfg.experiment}.csv", report.samples)
    for t in report.tests:
        print(f"{t.verdict.upper():8s} {t.name}: estimate={t.estimate.value:.6g} "
              f"target={t.target:.6g} statistic={t.statistic:.4g} p={t.p_value:.3g}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_oracle(cfg):
    params = cfg.params()
    n = cfg.n
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dist = oracle.exact_distribution(params, n)
    write_rows(out / "pmf.csv", ("k", "probability"), zip(range(n + 1), dist.pmf))
    es, es2 = oracle.moment_table(params, n)
    k = np.arange(n + 1)
    if params.a > -1.0:
        tab = sequences.table(params.a, n)
        an, A = tab.an[: n + 1], tab.big_a[: n + 1]
        q, s = params.q, params.s
        m2 = an * an * es2 - 2.0 * q * (s - q) * A - q * q * A * A
    else:
        m2 = np.full(n + 1, math.nan)
    write_rows(out / "moments.csv", ("k", "mean_S", "second_moment_S", "mean_M2"),
               zip(k[1:], es[1:], es2[1:], m2[1:]))
    doc = {"version": VERSION, "params": params.as_dict(), "regime": params.regime.value,
           "n": n, "constants": oracle.limit_constants(params).as_dict(),
           "pmf_sum": float(dist.pmf.sum())}
    write_json(out / "constants.json", doc)
    return EXIT_PASS


def trace_rows(params, n, seed):
    """Columns k, S_k, S_k/k, M_k, <M>_k, eps_k, dM_k, a_k eps_k, qsl_partial."""
    path = simulate_collapsed(params, n, RngStream(seed, 0))
    tab = sequences.table(params.a, n)
    mp = martingale.transform(path, params, tab)
    k = np.arange(n + 1, dtype=float)
    S = path.positions
    ratio = np.zeros(n + 1)
    ratio[1:] = S[1:] / k[1:]
    mu = params.limit_mean
    dev = (ratio - mu) ** 2
    dev[0] = 0.0
    crit = params.regime is Regime.CRITICAL
    qsl = np.full(n + 1, math.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        if crit:
            w = np.zeros(n + 1)
            w[2:] = 1.0 / np.log(k[2:]) ** 2
            part = np.cumsum(w * dev)
            ll = np.log(np.log(k[3:]))
            qsl[3:] = np.where(ll > 0, part[3:] / ll, math.nan)
        else:
            part = np.cumsum(dev)
            qsl[2:] = part[2:] / np.log(k[2:])
    dM = np.concatenate(([0.0], np.diff(mp.M)))
    aeps = tab.an[: n + 1] * mp.eps
    aeps[0] = 0.0
    for i in range(1, n + 1):
        yield (i, int(S[i]), ratio[i], mp.M[i], mp.bracket[i], mp.eps[i], dM[i], aeps[i], qsl[i])


def cmd_trace(cfg):
    params = cfg.params()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "trace.csv",
               ("k", "S_k", "S_k_over_k", "M_k", "bracket_k", "eps_k", "dM_k", "a_k_eps_k",
                "qsl_partial"),
               trace_rows(params, cfg.n, cfg.seed))
    return EXIT_PASS


# --------------------------------------------------------------------------
# entry point


def _parser():
    ap = argparse.ArgumentParser(prog="mrwlab", description="Minimal random walk laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "suite", "oracle", "trace"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat TOML file with defaults")
        sp.add_argument("--p", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--s", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        if name in ("run", "suite"):
            sp.add_argument("--replicas", type=int)
            sp.add_argument("--workers", type=int)
            sp.add_argument("--tolerance-scale", dest="tolerance_scale", type=float)
            sp.add_argument("--sampler", choices=("collapsed", "full_memory"))
        if name == "run":
            sp.add_argument("--experiment", choices=sorted(stats.REGIMES))
            sp.add_argument("--n-outer", dest="n_outer", type=int)
            sp.add_argument("--n-grid", dest="n_grid", type=int, nargs="+")
            sp.add_argument("--t-grid", dest="t_grid", type=float, nargs="+")
            sp.add_argument("--ks-level", dest="ks_level", type=float)
    return ap


COMMANDS = {"run": cmd_run, "suite": cmd_run, "oracle": cmd_oracle, "trace": cmd_trace}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except MRWError as exc:
        print(f"mrwlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
