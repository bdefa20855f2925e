from __future__ import annotations

import warnings

import numpy as np
import pytest

from pointscore.core import Dataset


def random_dataset(rng: np.random.Generator, n: int, p: int, signal: float = 1.0) -> Dataset:
    """Binary predictors with random prevalences; outcome weakly tied to a random subset.

    Both outcome classes are always present.
    """
    prevalence = rng.uniform(0.15, 0.85, size=p)
    X = (rng.random((n, p)) < prevalence).astype(np.int8)
    beta = rng.normal(0.0, signal, size=p)
    prob = 1.0 / (1.0 + np.exp(-(X @ beta - beta.sum() / 2)))
    y = (rng.random(n) < prob).astype(np.int8)
    y[0], y[1] = 1, 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Dataset(y, X)


def pairwise_auc_loop(scores, outcomes) -> float:
    """Literal double loop over case/control pairs."""
    cases = [s for s, y in zip(scores, outcomes) if y == 1]
    controls = [s for s, y in zip(scores, outcomes) if y == 0]
    total = 0.0
    for a in cases:
        for b in controls:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(cases) * len(controls))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def report(criterion: str, passed: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``passed`` for asserting."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
