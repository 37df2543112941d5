"""Estimates, verdicts and experiment reports, plus their JSON form."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

PASS, FAIL, ADVISORY = "pass", "fail", "advisory"
RULES = ("band", "pvalue", "threshold", "ceiling", "advisory")


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    stderr: float
    ci: tuple
    replicas: int
    level: float = 0.99

    def __post_init__(self):
        lo, hi = self.ci
        if not (self.stderr >= 0 and lo <= self.value <= hi):
            raise ValueError(f"inconsistent estimate {self}")

    @classmethod
    def normal(cls, value, stderr, replicas, level=0.99):
        z = float(_st.norm.ppf(0.5 + level / 2.0))
        value, stderr = float(value), float(stderr)
        return cls(value, stderr, (value - z * stderr, value + z * stderr), int(replicas),
                   float(level))

    @classmethod
    def mean_of(cls, x, level=0.99):
        x = np.asarray(x, float)
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls.normal(float(np.mean(x)), se, x.size, level)

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "ci": list(self.ci),
                "replicas": self.replicas, "level": self.level}

    @classmethod
    def from_dict(cls, d):
        return cls(d["value"], d["stderr"], tuple(d["ci"]), d["replicas"], d["level"])


@dataclass(frozen=True)
class TestResult:
    """One verdict.

    ``rule`` says what decided it: ``band`` (relative error of the estimate
    against the target within ``tolerance``), ``pvalue`` (p-value at least
    ``tolerance``), ``threshold`` / ``ceiling`` (statistic at least / at most
    ``tolerance``) or ``advisory`` (reported, never fails).
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float
    target: float
    estimate: EstimateWithCI
    verdict: str
    rule: str
    tolerance: float
    note: str = ""

    @property
    def passed(self):
        return self.verdict != FAIL

    def to_dict(self):
        return {
            "name": self.name, "statistic": self.statistic, "p_value": self.p_value,
            "target": self.target, "estimate": self.estimate.to_dict(),
            "verdict": self.verdict, "rule": self.rule, "tolerance": self.tolerance,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["estimate"] = EstimateWithCI.from_dict(d["estimate"])
        return cls(**d)


def z_pvalue(value, target, stderr):
    """Two-sided normal p-value of value - target in units of stderr."""
    if stderr <= 0:
        return 1.0 if value == target else 0.0
    return float(2.0 * _st.norm.sf(abs(value - target) / stderr))


def band_test(name, estimate, target, tolerance, note="", atol=0.0):
    """Relative band; a zero target is matched only within ``atol``."""
    target = float(target)
    err = abs(estimate.value - target)
    rel = err / abs(target) if target != 0 else (0.0 if err == 0 else math.inf)
    ok = err <= tolerance * abs(target) if target != 0 else err <= atol
    return TestResult(name, float(rel) if math.isfinite(rel) else float(err),
                      z_pvalue(estimate.value, target, estimate.stderr), target, estimate,
                      PASS if ok else FAIL, "band", float(tolerance), note)


def pvalue_test(name, statistic, p_value, estimate, target, level, note=""):
    return TestResult(name, float(statistic), float(p_value), float(target), estimate,
                      PASS if p_value >= level else FAIL, "pvalue", float(level), note)


def threshold_test(name, statistic, threshold, estimate, target, p_value=1.0, note=""):
    return TestResult(name, float(statistic), float(p_value), float(target), estimate,
                      PASS if statistic >= threshold else FAIL, "threshold", float(threshold),
                      note)


def ceiling_test(name, statistic, ceiling, estimate, target, p_value=1.0, note=""):
    return TestResult(name, float(statistic), float(p_value), float(target), estimate,
                      PASS if statistic <= ceiling else FAIL, "ceiling", float(ceiling), note)


def advisory(name, statistic, estimate, target, note=""):
    return TestResult(name, float(statistic), 1.0, float(target), estimate, ADVISORY,
                      "advisory", 0.0, note)


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    regime: str
    n: int
    replicas: int
    seed: int
    tests: list
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def passed(self):
        return all(t.passed for t in self.tests)

    def to_dict(self, timings=True):
        d = {
            "experiment": self.experiment, "params": dict(self.params),
            "regime": self.regime, "n": self.n, "replicas": self.replicas,
            "seed": self.seed, "tests": [t.to_dict() for t in self.tests],
            "info": _plain(self.info),
        }
        if timings:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["experiment"], d["params"], d["regime"], d["n"], d["replicas"],
                   d["seed"], [TestResult.from_dict(t) for t in d["tests"]],
                   d.get("wall_time", 0.0), d.get("info", {}))


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# --------------------------------------------------------------------------
# JSON with 17 significant digits


def _encode(x, out):
    if x is None:
        out.append("null")
    elif isinstance(x, (bool, np.bool_)):
        out.append("true" if x else "false")
    elif isinstance(x, (int, np.integer)):
        out.append(str(int(x)))
    elif isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            # JSON has no inf/nan; keep them readable and round-trippable
            out.append('"%s"' % ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")))
        else:
            r = format(x, ".17g")
            # keep floats recognizable as floats after a round trip
            out.append(r if any(c in r for c in ".en") else r + ".0")
    elif isinstance(x, str):
        out.append(json.dumps(x, ensure_ascii=False))
    elif isinstance(x, dict):
        out.append("{")
        for i, (k, v) in enumerate(x.items()):
            if i:
                out.append(", ")
            _encode(str(k), out)
            out.append(": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(x, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(x):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj):
    out = []
    _encode(_plain(obj), out)
    return "".join(out) + "\n"


def loads(text):
    def fix(v):
        if isinstance(v, dict):
            return {k: fix(w) for k, w in v.items()}
        if isinstance(v, list):
            return [fix(w) for w in v]
        if v in ("nan", "inf", "-inf"):
            return float(v)
        return v

    return fix(json.loads(text))
