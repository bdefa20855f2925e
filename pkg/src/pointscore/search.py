"""Greedy target-improvement search over integer coefficient lattices.

Four policies share one engine:

``greedy``
    evaluate every single-coordinate change and take the largest immediate AUC gain.
``local_step``
    as ``greedy`` but a coefficient may only move by one level.
``look_ahead``
    rank each candidate change by the AUC reached when the depth-``k - 1``
    search is rerun to termination from the changed state.
``local_step_look_ahead``
    ``look_ahead`` restricted to one-level moves (continuations too).

All gains are compared as exact integers (twice the concordant-pair count
plus the tied-pair count), so ties are genuine ties and never rounding noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    ActionSet,
    Dataset,
    DegenerateDataError,
    auc_from_histogram,
    batch_concordance,
    compute_scores,
    tabulate,
    update_scores,
)

POLICIES = ("greedy", "local_step", "look_ahead", "local_step_look_ahead")
MAX_LOOK_AHEAD_DEPTH = 3


class StratificationError(DegenerateDataError):
    """Cross-validation folds cannot each contain both outcome classes."""


@dataclass(frozen=True)
class SearchConfig:
    """Settings for :func:`fit`.

    ``top_k`` shortlists candidates by immediate gain before look-ahead
    evaluation; ``truncation`` caps the number of steps taken by each
    continuation. ``max_iterations`` defaults to ``10 * p * L``.
    """

    action_set: ActionSet = ActionSet(1)
    policy: str = "greedy"
    look_ahead_depth: int = 1
    top_k: Optional[int] = None
    truncation: Optional[int] = None
    max_iterations: Optional[int] = None
    cache_enabled: bool = True

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if not 1 <= self.look_ahead_depth <= MAX_LOOK_AHEAD_DEPTH:
            raise ValueError(f"look_ahead_depth must be in 1..{MAX_LOOK_AHEAD_DEPTH}")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    @property
    def local(self) -> bool:
        return self.policy.startswith("local_step")

    @property
    def uses_look_ahead(self) -> bool:
        return self.policy.endswith("look_ahead")


@dataclass(frozen=True)
class CandidateMove:
    """Set coordinate ``coordinate`` to ``action``.

    ``count_gain`` is the exact change in the doubled concordance count and
    is what moves are ranked by; ``gain`` is the same change on the AUC scale.
    """

    coordinate: int
    action: int
    gain: float = 0.0
    count_gain: int = 0


@dataclass(frozen=True)
class IterationRecord:
    coordinate: int
    action: int
    objective_before: float
    objective_after: float
    gain: float
    candidates_evaluated: int
    continuation_reruns: int


@dataclass
class SearchTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def objectives(self) -> list:
        """Training AUC at the start and after every accepted step."""
        if not self.records:
            return []
        return [self.records[0].objective_before] + [r.objective_after for r in self.records]

    def weight_path(self, p: int) -> list:
        """Weight vectors after 0, 1, ..., T accepted steps (starting from zero)."""
        w = np.zeros(p, dtype=np.int64)
        path = [w.copy()]
        for r in self.records:
            w[r.coordinate] = r.action
            path.append(w.copy())
        return path


@dataclass
class FitResult:
    weights: np.ndarray
    train_objective: float
    trace: SearchTrace
    method: str
    action_set_L: int
    predictor_names: tuple
    stopped_early: bool = False
    cv_iteration: Optional[int] = None
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def weight_map(self) -> dict:
        return {name: int(w) for name, w in zip(self.predictor_names, self.weights)}

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "action_set_L": self.action_set_L,
            "weights": self.weight_map(),
            "train_auc": self.train_objective,
            "iterations": self.iterations,
            "stopped_early": self.stopped_early,
            "cv_iteration": self.cv_iteration,
            "trace": [
                {
                    "coordinate": self.predictor_names[r.coordinate],
                    "action": r.action,
                    "objective_before": r.objective_before,
                    "objective_after": r.objective_after,
                    "gain": r.gain,
                    "candidates_evaluated": r.candidates_evaluated,
                    "continuation_reruns": r.continuation_reruns,
                }
                for r in self.trace
            ],
        }
        doc.update(self.extras)
        return doc

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def enumerate_candidates(weights, cfg: SearchConfig) -> list:
    """All ``(coordinate, action)`` pairs the policy may move to from ``weights``.

    >>> enumerate_candidates([0, 2], SearchConfig(ActionSet(2), policy="local_step"))
    [(0, 1), (1, 1)]
    """
    w = cfg.action_set.check(weights)
    js, acts = _candidate_arrays(w, cfg.action_set.max_level, cfg.local)
    return list(zip(js.tolist(), acts.tolist()))


def _candidate_arrays(w: np.ndarray, L: int, local: bool):
    p = len(w)
    if local:
        js = np.concatenate([np.arange(p), np.arange(p)])
        acts = np.concatenate([w - 1, w + 1])
        keep = (acts >= 0) & (acts <= L)
        js, acts = js[keep], acts[keep]
        order = np.lexsort((acts, js))
        return js[order], acts[order]
    js = np.repeat(np.arange(p), L + 1)
    acts = np.tile(np.arange(L + 1), p)
    keep = acts != w[js]
    return js[keep], acts[keep]


def _balance_key(data: Dataset) -> np.ndarray:
    # |prevalence - 1/2| scaled by 2n, kept integral for exact comparison
    return np.abs(2 * data.predictors.sum(axis=0).astype(np.int64) - data.n)


def _tie_break_order(w, js, acts, gains, balance, immediate=None) -> np.ndarray:
    inactive = (w[js] == 0).astype(np.int64)
    step = np.abs(acts - w[js])
    keys = [acts, js, step, balance[js], inactive]
    if immediate is not None:
        keys.append(-np.asarray(immediate))
    keys.append(-np.asarray(gains))
    return np.lexsort(keys)


def tie_break(moves, weights, data: Dataset) -> CandidateMove:
    """Pick one move among those with the largest gain.

    Keys, in order: moves on an already-active coefficient; coordinates whose
    prevalence is closest to 1/2; smallest change in the coefficient; lowest
    coordinate index; smallest action.
    """
    if not moves:
        raise ValueError("tie_break needs at least one move")
    w = np.asarray(weights, dtype=np.int64)
    balance = _balance_key(data)
    best = max(m.count_gain for m in moves)
    tied = [m for m in moves if m.count_gain == best]
    return min(
        tied,
        key=lambda m: (
            w[m.coordinate] == 0,
            balance[m.coordinate],
            abs(m.action - w[m.coordinate]),
            m.coordinate,
            m.action,
        ),
    )


class _Engine:
    """Search state shared by one fit invocation (data arrays, caches, counters)."""

    def __init__(self, data: Dataset, cfg: SearchConfig):
        data.require_both_classes()
        self.data = data
        self.cfg = cfg
        self.L = cfg.action_set.max_level
        self.y = data.outcomes
        self.Xt = data.predictors.T.astype(np.int64)
        self.denom = 2 * data.n1 * data.n0
        self.balance = _balance_key(data)
        self.default_cap = 10 * data.p * self.L
        self.cache = {} if cfg.cache_enabled else None
        self.reruns = 0
        self.cache_hits = 0

    def count(self, s: np.ndarray) -> int:
        return int(batch_concordance(s[None, :], self.y)[0])

    def candidate_counts(self, w, s, js, acts) -> np.ndarray:
        delta = acts - w[js]
        rows = s[None, :] + delta[:, None] * self.Xt[js]
        return batch_concordance(rows, self.y)

    def candidates(self, w):
        return _candidate_arrays(w, self.L, self.cfg.local)

    def run(self, w, s, c, depth, max_steps, trace=None):
        """Search from ``(w, s)`` until no move improves or ``max_steps`` is hit.

        Returns the final ``(w, s, c, steps)`` where ``c`` is the concordance count.
        """
        w = w.copy()
        s = s.copy()
        steps = 0
        while steps < max_steps:
            js, acts = self.candidates(w)
            if len(js) == 0:
                break
            counts0 = self.candidate_counts(w, s, js, acts)
            reruns_before = self.reruns
            if depth == 0:
                gains = counts0 - c
                evaluated = len(js)
            else:
                if self.cfg.top_k is not None and self.cfg.top_k < len(js):
                    keep = _tie_break_order(w, js, acts, counts0 - c, self.balance)[: self.cfg.top_k]
                    keep.sort()
                    js, acts, counts0 = js[keep], acts[keep], counts0[keep]
                gains = np.empty(len(js), dtype=np.int64)
                for i in range(len(js)):
                    wf = w.copy()
                    wf[js[i]] = acts[i]
                    sf = s + (acts[i] - w[js[i]]) * self.Xt[js[i]]
                    gains[i] = self.terminal(wf, sf, int(counts0[i]), depth - 1) - c
                evaluated = len(js)
            immediate = None if depth == 0 else counts0 - c
            best = _tie_break_order(w, js, acts, gains, self.balance, immediate)[0]
            if gains[best] <= 0:
                break
            j, a = int(js[best]), int(acts[best])
            c_new = int(counts0[best])
            if trace is not None:
                trace.records.append(
                    IterationRecord(
                        coordinate=j,
                        action=a,
                        objective_before=c / self.denom,
                        objective_after=c_new / self.denom,
                        gain=int(gains[best]) / self.denom,
                        candidates_evaluated=evaluated,
                        continuation_reruns=self.reruns - reruns_before,
                    )
                )
            s = s + (a - w[j]) * self.Xt[j]
            w[j] = a
            c = c_new
            steps += 1
        return w, s, c, steps

    def terminal(self, w, s, c, depth) -> int:
        """Concordance count at the end of a depth-``depth`` search started from ``w``."""
        cap = self.cfg.truncation if self.cfg.truncation is not None else self.default_cap
        if self.cache is None:
            self.reruns += 1
            return self.run(w, s, c, depth, cap)[2]
        key = (w.tobytes(), depth)
        hit = self.cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        self.reruns += 1
        if depth == 0 and self.cfg.truncation is None:
            return self._greedy_terminal_cached(w, s, c)
        value = self.run(w, s, c, depth, cap)[2]
        self.cache[key] = value
        return value

    def _greedy_terminal_cached(self, w, s, c) -> int:
        # Plain greedy is a deterministic function of the current state, so every
        # state along the path shares the terminal value.
        w = w.copy()
        path = []
        value = None
        for _ in range(self.default_cap + 1):
            key = (w.tobytes(), 0)
            hit = self.cache.get(key)
            if hit is not None:
                value = hit
                break
            path.append(key)
            if len(path) > self.default_cap:
                value = c
                break
            js, acts = self.candidates(w)
            if len(js) == 0:
                value = c
                break
            counts = self.candidate_counts(w, s, js, acts)
            best = _tie_break_order(w, js, acts, counts - c, self.balance)[0]
            if counts[best] <= c:
                value = c
                break
            j, a = int(js[best]), int(acts[best])
            s = s + (a - w[j]) * self.Xt[j]
            w[j] = a
            c = int(counts[best])
        for key in path:
            self.cache[key] = value
        return value


def _max_iterations(cfg: SearchConfig, data: Dataset) -> int:
    if cfg.max_iterations is not None:
        return cfg.max_iterations
    return 10 * data.p * cfg.action_set.max_level


def _fit(data: Dataset, cfg: SearchConfig, depth: int) -> FitResult:
    engine = _Engine(data, cfg)
    w0 = np.zeros(data.p, dtype=np.int64)
    s0 = np.zeros(data.n, dtype=np.int64)
    c0 = engine.count(s0)
    trace = SearchTrace()
    cap = _max_iterations(cfg, data)
    w, s, c, steps = engine.run(w0, s0, c0, depth, cap, trace=trace)
    return FitResult(
        weights=w,
        train_objective=c / engine.denom,
        trace=trace,
        method=cfg.policy,
        action_set_L=cfg.action_set.max_level,
        predictor_names=data.predictor_names,
        stopped_early=cfg.max_iterations is not None and steps >= cfg.max_iterations
        and _can_continue(engine, w, s, c, depth),
        extras={"continuation_reruns": engine.reruns, "cache_hits": engine.cache_hits},
    )


def _can_continue(engine, w, s, c, depth) -> bool:
    return engine.run(w, s, c, depth, 1)[3] > 0


def fit_greedy(data: Dataset, cfg: SearchConfig = SearchConfig()) -> FitResult:
    """Greedy target improvement from the zero vector using immediate gains.

    Uses one-level moves when ``cfg.policy`` is a local-step policy.
    """
    return _fit(data, cfg, 0)


def fit_lookahead(data: Dataset, cfg: SearchConfig = SearchConfig(policy="look_ahead")) -> FitResult:
    """Look-ahead search of depth ``cfg.look_ahead_depth`` from the zero vector.

    A candidate's gain is the AUC at the end of the depth-``k - 1`` search
    (plain greedy for ``k = 1``) started from the candidate state, minus the
    current AUC. The search stops when no candidate has a positive gain.

    Look-ahead values tie often (many first moves lead greedy to the same
    end point), so ties are broken by the immediate gain before the usual
    keys of :func:`tie_break`. With that rule the path follows the greedy
    path whenever the greedy path is already optimal for the look-ahead value.
    """
    return _fit(data, cfg, cfg.look_ahead_depth)


def fit(data: Dataset, cfg: SearchConfig = SearchConfig()) -> FitResult:
    """Dispatch to :func:`fit_lookahead` or :func:`fit_greedy` by policy."""
    if cfg.uses_look_ahead:
        return fit_lookahead(data, cfg)
    return fit_greedy(data, cfg)


def gain_r0(data: Dataset, weights, scores, j: int, a: int) -> float:
    """Immediate change in AUC from setting coefficient ``j`` to ``a``."""
    w = np.asarray(weights, dtype=np.int64)
    new = update_scores(scores, data, j, int(w[j]), a)
    return auc_from_histogram(tabulate(new, data)) - auc_from_histogram(tabulate(scores, data))


def gain_lookahead(data: Dataset, weights, j: int, a: int, depth: int = 1,
                   cfg: SearchConfig = SearchConfig()) -> float:
    """AUC after forcing ``weights[j] = a`` and running the depth-``depth - 1``
    search to termination, minus the AUC at ``weights``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    engine = _Engine(data, cfg)
    w = cfg.action_set.check(weights)
    s = compute_scores(data, w)
    c = engine.count(s)
    wf = w.copy()
    wf[j] = a
    sf = update_scores(s, data, j, int(w[j]), a)
    return (engine.terminal(wf, sf, engine.count(sf), depth - 1) - c) / engine.denom


def evaluate(data: Dataset, weights) -> float:
    """Tied AUC of the integer score ``X @ weights`` on ``data``."""
    data.require_both_classes()
    return auc_from_histogram(tabulate(compute_scores(data, np.asarray(weights)), data))


def stratified_folds(outcomes, k: int, seed=0) -> np.ndarray:
    """Fold label (0..k-1) for each subject, balancing cases and controls."""
    y = np.asarray(outcomes)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > min(n1, n0):
        raise StratificationError(f"{k} folds need at least {k} cases and {k} controls (n1={n1}, n0={n0})")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = np.arange(len(idx)) % k
    return folds


def fit_cv_stopped(data: Dataset, cfg: SearchConfig = SearchConfig(), folds: int = 5,
                   seed=0) -> FitResult:
    """Choose the number of accepted steps by K-fold cross-validation, then refit.

    Each training fold is searched with ``cfg``; the validation AUC after each
    accepted step (held flat after the fold's own termination) is averaged over
    folds, and the first maximizer ``t*`` caps the full-data refit.
    """
    data.require_both_classes()
    labels = stratified_folds(data.outcomes, folds, seed)
    curves = []
    for k in range(folds):
        train = data.subset(labels != k)
        valid = data.subset(labels == k)
        result = fit(train, cfg)
        curves.append([evaluate(valid, w) for w in result.trace.weight_path(data.p)])
    length = max(len(c) for c in curves)
    padded = np.array([c + [c[-1]] * (length - len(c)) for c in curves])
    mean_curve = padded.mean(axis=0)
    t_star = int(np.argmax(mean_curve))
    refit = fit(data, replace(cfg, max_iterations=t_star))
    refit.cv_iteration = t_star
    refit.extras["cv_curve"] = mean_curve.tolist()
    return refit
