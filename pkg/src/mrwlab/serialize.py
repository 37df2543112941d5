"""Results files: JSON verdict documents and per-replica CSV tables."""

import csv
import math

import numpy as np

from . import __version__
from .report import ExperimentReport, TestResult, dumps, loads

VERSION = f"v{__version__}"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else repr(x)


def _test_entry(t):
    d = t.to_dict()
    d["ci"] = list(t.estimate.ci)
    return d


def results_document(report, config=None):
    """JSON-ready dict; everything except ``timings`` is deterministic."""
    return {
        "version": VERSION,
        "config": dict(config or {}),
        "experiment": report.experiment,
        "params": report.params,
        "regime": report.regime,
        "n": report.n,
        "replicas": report.replicas,
        "seed": report.seed,
        "passed": report.passed,
        "tests": [_test_entry(t) for t in report.tests],
        "info": report.info,
        "timings": {"wall_time": report.wall_time},
    }


def report_from_document(doc):
    tests = []
    for d in doc["tests"]:
        d = {k: v for k, v in d.items() if k != "ci"}
        tests.append(TestResult.from_dict(d))
    return ExperimentReport(doc["experiment"], doc["params"], doc["regime"], doc["n"],
                            doc["replicas"], doc["seed"], tests,
                            doc.get("timings", {}).get("wall_time", 0.0), doc.get("info", {}))


def write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(doc))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_samples_csv(path, samples):
    """One row per (statistic, replica, checkpoint): statistic, replica_index, n, value.

    ``samples`` maps a statistic name to ``(checkpoints, array)`` with one
    array column per checkpoint.
    """
    def rows():
        for name, (ns, arr) in samples.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                arr = arr[:, None]
            for i in range(arr.shape[0]):
                for j, k in enumerate(ns):
                    yield (name, i, k, arr[i, j])

    write_rows(path, ("statistic", "replica_index", "n", "value"), rows())


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))
