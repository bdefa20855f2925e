"""Replicated simulation experiments, timing runs and result tables.

Replicate ``b`` of sample size ``n`` in a setting draws its training and test
samples from ``SeedSequence([seed, setting_id, n, b]).spawn(2)``, so results
do not depend on execution order or on how replicates are split across
worker processes.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baseline import BaselineConfig, baseline_fit, fit_logistic
from .core import ActionSet, Dataset, auc_continuous, compute_scores
from .search import POLICIES, SearchConfig, evaluate, fit
from .simgen import SETTING_IDS, SimConfig, generate

log = logging.getLogger(__name__)

METHODS = POLICIES + ("logistic_rounding", "logistic_continuous", "fixed_weights")
DEFAULT_SEED = 20240531


class MergeError(ValueError):
    """Two shards contain the same replicate key."""


@dataclass
class ExperimentSpec:
    """One simulation study: a setting, methods, sample sizes and replicates.

    ``search_options`` are passed to :class:`SearchConfig` (e.g. ``top_k``);
    ``fixed_weights`` is required for the ``fixed_weights`` method.
    """

    setting: str
    methods: Sequence[str] = ("greedy", "local_step", "look_ahead", "local_step_look_ahead",
                              "logistic_rounding", "logistic_continuous")
    n_values: Sequence[int] = (100, 200, 400)
    replicates: int = 100
    test_n: int = 5000
    seed: int = DEFAULT_SEED
    max_level: int = 1
    p: Optional[int] = None
    search_options: dict = field(default_factory=dict)
    baseline: BaselineConfig = BaselineConfig(max_level=1, lam=1.0)
    fixed_weights: Optional[Sequence[int]] = None
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.methods:
            raise ValueError("need at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if "fixed_weights" in self.methods and self.fixed_weights is None:
            raise ValueError("the fixed_weights method needs fixed_weights")


@dataclass(frozen=True)
class ReplicateRecord:
    setting: str
    method: str
    n: int
    replicate: int
    test_auc: float
    train_auc: float
    seconds: float
    iterations: int = 0
    error: str = ""

    @property
    def key(self):
        return (self.setting, self.method, self.n, self.replicate)

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class ResultTable:
    """Replicate-level results plus optional timing cells."""

    records: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)

    def add(self, record: ReplicateRecord):
        if record.key in self.records:
            raise MergeError(f"duplicate replicate key {record.key}")
        self.records[record.key] = record

    def cells(self) -> list:
        return sorted({k[:3] for k in self.records}, key=lambda c: (c[0], c[2], METHODS.index(c[1])))

    def values(self, setting: str, method: str, n: int, field_name: str = "test_auc") -> np.ndarray:
        """Successful replicate values for one cell, ordered by replicate index."""
        rows = sorted(
            (r for k, r in self.records.items() if k[:3] == (setting, method, n) and r.ok),
            key=lambda r: r.replicate,
        )
        return np.array([getattr(r, field_name) for r in rows])

    def failures(self, setting: str, method: str, n: int) -> int:
        return sum(1 for k, r in self.records.items() if k[:3] == (setting, method, n) and not r.ok)

    def mean(self, setting: str, method: str, n: int) -> float:
        return float(self.values(setting, method, n).mean())

    def summary(self) -> list:
        rows = []
        for setting, method, n in self.cells():
            v = self.values(setting, method, n)
            rows.append({
                "setting": setting,
                "method": method,
                "n": n,
                "mean": float(v.mean()) if v.size else math.nan,
                "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "replicates": int(v.size),
                "failures": self.failures(setting, method, n),
                "mean_seconds": float(self.values(setting, method, n, "seconds").mean()) if v.size else math.nan,
            })
        return rows

    def write_long_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["setting", "method", "n", "replicate", "test_auc", "train_auc",
                             "seconds", "iterations", "error"])
            for key in sorted(self.records, key=lambda k: (k[0], k[2], METHODS.index(k[1]), k[3])):
                r = self.records[key]
                writer.writerow([r.setting, r.method, r.n, r.replicate, r.test_auc, r.train_auc,
                                 r.seconds, r.iterations, r.error])

    def write_summary_csv(self, path):
        _write_dicts(path, self.summary(), ["setting", "method", "n", "mean", "sd", "replicates",
                                            "failures", "mean_seconds"])

    def write_timing_csv(self, path):
        _write_dicts(path, self.timings, ["vary", "L", "p", "n", "method", "mean_seconds", "replicates"])


def _write_dicts(path, rows, columns):
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def aggregate(*tables: ResultTable) -> ResultTable:
    """Merge result shards keyed by ``(setting, method, n, replicate)``."""
    merged = ResultTable()
    for table in tables:
        for record in table.records.values():
            merged.add(record)
        merged.timings.extend(table.timings)
    return merged


def replicate_samples(setting: str, n: int, replicate: int, test_n: int, seed: int = DEFAULT_SEED,
                      p: Optional[int] = None):
    """Training and test samples for one replicate."""
    train_seq, test_seq = np.random.SeedSequence([seed, SETTING_IDS[setting], n, replicate]).spawn(2)
    train = generate(SimConfig(setting, n, seed=train_seq, p=p))
    test = generate(SimConfig(setting, test_n, seed=test_seq, p=p))
    return train, test


def fit_method(method: str, train: Dataset, max_level: int = 1, search_options: Optional[dict] = None,
               baseline: BaselineConfig = BaselineConfig(), fixed_weights=None):
    """Fit one method; returns ``(scorer, train_auc, iterations)``.

    ``scorer(data)`` gives the test AUC. Integer methods are scored with the
    tied AUC of their integer score, ``logistic_continuous`` with the tied AUC
    of its linear predictor.
    """
    if method in POLICIES:
        cfg = SearchConfig(action_set=ActionSet(max_level), policy=method, **(search_options or {}))
        result = fit(train, cfg)
        weights = result.weights
        return (lambda d: evaluate(d, weights)), result.train_objective, result.iterations
    if method == "logistic_rounding":
        result = baseline_fit(train, baseline)
        weights = result.weights
        return (lambda d: evaluate(d, weights)), result.train_objective, 0
    if method == "logistic_continuous":
        lf = fit_logistic(train, baseline)
        scorer = lambda d: auc_continuous(lf.linear_predictor(d), d.outcomes)  # noqa: E731
        return scorer, scorer(train), lf.iterations
    if method == "fixed_weights":
        weights = np.asarray(fixed_weights, dtype=np.int64)
        return (lambda d: evaluate(d, weights)), evaluate(train, weights), 0
    raise ValueError(f"unknown method {method!r}")


def _run_replicate(spec: ExperimentSpec, n: int, b: int) -> list:
    train, test = replicate_samples(spec.setting, n, b, spec.test_n, spec.seed, spec.p)
    records = []
    for method in spec.methods:
        start = time.perf_counter()
        try:
            scorer, train_auc, iterations = fit_method(
                method, train.data, spec.max_level, spec.search_options, spec.baseline, spec.fixed_weights
            )
            seconds = time.perf_counter() - start
            records.append(ReplicateRecord(spec.setting, method, n, b, scorer(test.data), train_auc,
                                           seconds, iterations))
        except Exception as exc:  # recorded and excluded from summaries
            log.warning("%s n=%d replicate %d %s failed: %s", spec.setting, n, b, method, exc)
            records.append(ReplicateRecord(spec.setting, method, n, b, math.nan, math.nan,
                                           time.perf_counter() - start, 0, f"{type(exc).__name__}: {exc}"))
    return records


def _run_chunk(args):
    spec, tasks = args
    return [rec for n, b in tasks for rec in _run_replicate(spec, n, b)]


def run_experiment(spec: ExperimentSpec, replicate_range: Optional[range] = None) -> ResultTable:
    """Fit every method on every replicate and score it on an independent test sample.

    ``replicate_range`` restricts the run to a shard of replicate indices;
    shards are combined with :func:`aggregate`.
    """
    indices = replicate_range if replicate_range is not None else range(spec.replicates)
    tasks = [(n, b) for n in spec.n_values for b in indices]
    table = ResultTable()
    if spec.workers > 1 and len(tasks) > 1:
        chunks = [tasks[i :: spec.workers] for i in range(spec.workers)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for records in pool.map(_run_chunk, [(replace(spec, workers=1), c) for c in chunks]):
                for rec in records:
                    table.add(rec)
    else:
        for rec in _run_chunk((spec, tasks)):
            table.add(rec)
    return table


TIMING_METHODS = ("greedy", "local_step", "look_ahead", "local_step_look_ahead", "logistic", "logistic_rounding")


def _timed(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def run_timing(L_values=(1, 2, 3, 4, 5), p_values=(5, 10, 15, 20, 25), n_values=(100, 200, 300, 400, 500),
               replicates: int = 3, methods=TIMING_METHODS, base=(1, 20, 200), repeats: int = 5,
               seed: int = DEFAULT_SEED) -> ResultTable:
    """Wall-clock time per method on Setting 1 data, varying one of ``L``, ``p``, ``n`` at a time.

    Each cell reports the mean over ``replicates`` datasets of the median of
    ``repeats`` runs. Parameters not being varied stay at ``base = (L, p, n)``.
    """
    table = ResultTable()
    cells = [("L", (L, base[1], base[2])) for L in L_values]
    cells += [("p", (base[0], p, base[2])) for p in p_values]
    cells += [("n", (base[0], base[1], n)) for n in n_values]
    for vary, (L, p, n) in cells:
        per_method = {m: [] for m in methods}
        for b in range(replicates):
            seq = np.random.SeedSequence([seed, SETTING_IDS["s1"], L, p, n, b])
            data = generate(SimConfig("s1", n, seed=seq, p=p)).data
            for method in methods:
                per_method[method].append(_timed(_timing_job(method, data, L), repeats))
        for method in methods:
            table.timings.append({
                "vary": vary, "L": L, "p": p, "n": n, "method": method,
                "mean_seconds": float(np.mean(per_method[method])), "replicates": replicates,
            })
    return table


def _timing_job(method, data, L):
    if method == "logistic":
        return lambda: fit_logistic(data, BaselineConfig(max_level=L))
    if method == "logistic_rounding":
        return lambda: baseline_fit(data, BaselineConfig(max_level=L))
    cfg = SearchConfig(action_set=ActionSet(L), policy=method)
    return lambda: fit(data, cfg)


def figure2_matrix(table: ResultTable) -> list:
    """Timing cells as rows ``(vary, value, method, mean_seconds)``."""
    return [
        {"vary": t["vary"], "value": t[t["vary"]], "method": t["method"], "mean_seconds": t["mean_seconds"]}
        for t in table.timings
    ]


def score_curve(data: Dataset, weights) -> list:
    """Observed event rate at each achieved score value."""
    s = compute_scores(data, np.asarray(weights))
    rows = []
    for level in np.unique(s):
        mask = s == level
        count = int(mask.sum())
        events = int(data.outcomes[mask].sum())
        rows.append({"score": int(level), "count": count, "events": events, "rate": events / count})
    return rows


def write_score_curve(path, rows):
    _write_dicts(path, rows, ["score", "count", "events", "rate"])
