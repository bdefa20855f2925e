"""Data model, integer score arithmetic and the tied-AUC objective.

Scores are exact integers. Concordance is accumulated as an integer count of
case/control pairs scaled by two (ties contribute one unit, wins two), so the
only floating point operation in an AUC evaluation is the final division.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class DataFormatError(ValueError):
    """Input file or array does not follow the binary dataset format."""


class DegenerateDataError(ValueError):
    """The objective is undefined because one outcome class is empty."""


class SchemaMismatchError(ValueError):
    """Weights and predictors do not refer to the same set of names."""


class BudgetExceededError(RuntimeError):
    """A requested enumeration or convolution exceeds its size budget."""


@dataclass(frozen=True)
class ActionSet:
    """Admissible coefficient values ``{0, 1, ..., max_level}``."""

    max_level: int

    def __post_init__(self):
        if int(self.max_level) != self.max_level or self.max_level < 1:
            raise ValueError(f"max_level must be an integer >= 1, got {self.max_level!r}")

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.max_level + 1)

    def __contains__(self, value) -> bool:
        return int(value) == value and 0 <= value <= self.max_level

    def __len__(self) -> int:
        return self.max_level + 1

    def check(self, weights) -> np.ndarray:
        """Return ``weights`` as an int64 array, raising if any entry is out of range."""
        w = np.asarray(weights)
        if w.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if w.size and not np.all(w == np.round(w)):
            raise ValueError("weights must be integers")
        w = w.astype(np.int64)
        if np.any(w < 0) or np.any(w > self.max_level):
            raise ValueError(f"weights must lie in 0..{self.max_level}: {w.tolist()}")
        return w


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary outcomes with an ``n x p`` matrix of binary predictors.

    Parameters
    ----------
    outcomes : array of shape (n,)
        0/1 labels; 1 marks a case.
    predictors : array of shape (n, p)
        0/1 indicators.
    predictor_names : sequence of str, optional
        Unique column names. Defaults to ``x1..xp``.
    """

    outcomes: np.ndarray
    predictors: np.ndarray
    predictor_names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.outcomes)
        X = np.asarray(self.predictors)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataFormatError(
                f"outcomes of shape {y.shape} and predictors of shape {X.shape} are incompatible"
            )
        if not np.all((y == 0) | (y == 1)):
            raise DataFormatError("outcomes must be 0/1")
        if not np.all((X == 0) | (X == 1)):
            raise DataFormatError("predictors must be 0/1")
        names = tuple(self.predictor_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataFormatError(f"expected {X.shape[1]} predictor names, got {len(names)}")
        if len(set(names)) != len(names):
            raise DataFormatError("predictor names must be unique")
        y = y.astype(np.int8)
        X = X.astype(np.int8)
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "predictor_names", names)
        if X.shape[0] > 0:
            sums = X.sum(axis=0)
            constant = [names[j] for j in np.flatnonzero((sums == 0) | (sums == X.shape[0]))]
            if constant:
                warnings.warn(f"constant predictor columns: {', '.join(constant)}", stacklevel=3)

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def p(self) -> int:
        return self.predictors.shape[1]

    @property
    def n1(self) -> int:
        return int(self.outcomes.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def prevalence(self) -> np.ndarray:
        """Column means of the predictor matrix."""
        return self.predictors.mean(axis=0)

    def require_both_classes(self):
        if self.n1 == 0 or self.n0 == 0:
            raise DegenerateDataError(
                f"AUC needs at least one case and one control (n1={self.n1}, n0={self.n0})"
            )

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Dataset(self.outcomes[rows], self.predictors[rows], self.predictor_names)

    @classmethod
    def from_csv(cls, path, outcome: str) -> "Dataset":
        """Read a headered CSV in which every column is 0/1.

        ``outcome`` names the label column; all other columns are predictors.
        Any cell that is not exactly ``0`` or ``1`` raises :class:`DataFormatError`
        naming the row (1-based, header excluded) and column.
        """
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataFormatError(f"{path}: empty file") from None
            if outcome not in header:
                raise DataFormatError(f"{path}: outcome column {outcome!r} not in header")
            if len(set(header)) != len(header):
                raise DataFormatError(f"{path}: duplicate column names in header")
            rows = []
            for lineno, row in enumerate(reader, start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise DataFormatError(
                        f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                    )
                values = []
                for col, cell in zip(header, row):
                    cell = cell.strip()
                    if cell not in ("0", "1"):
                        raise DataFormatError(
                            f"{path}: row {lineno}, column {col!r}: expected 0 or 1, got {cell!r}"
                        )
                    values.append(cell == "1")
                rows.append(values)
        table = np.array(rows, dtype=np.int8).reshape(len(rows), len(header))
        k = header.index(outcome)
        names = [h for i, h in enumerate(header) if i != k]
        return cls(table[:, k], np.delete(table, k, axis=1), tuple(names))

    def to_csv(self, path, outcome: str = "y", extra_columns: dict | None = None):
        """Write the dataset (outcome first) in the format read by :meth:`from_csv`."""
        extra_columns = extra_columns or {}
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([outcome, *self.predictor_names, *extra_columns])
            extras = [np.asarray(v) for v in extra_columns.values()]
            for i in range(self.n):
                writer.writerow(
                    [int(self.outcomes[i]), *self.predictors[i].tolist(), *(e[i] for e in extras)]
                )


@dataclass(frozen=True)
class ScoreHistogram:
    """Case and control counts at each distinct score value.

    ``levels`` is strictly increasing; ``case_counts[m]`` and
    ``control_counts[m]`` count the subjects scoring ``levels[m]``.
    """

    levels: np.ndarray
    case_counts: np.ndarray
    control_counts: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n1(self) -> int:
        return int(self.case_counts.sum())

    @property
    def n0(self) -> int:
        return int(self.control_counts.sum())


def compute_scores(data: Dataset, weights) -> np.ndarray:
    """Integer scores ``X @ weights`` for every subject."""
    w = np.asarray(weights)
    if w.ndim != 1 or w.shape[0] != data.p:
        raise ValueError(f"weights of shape {w.shape} do not match p={data.p}")
    return data.predictors.astype(np.int64) @ w.astype(np.int64)


def update_scores(scores, data: Dataset, j: int, old: int, new: int) -> np.ndarray:
    """Scores after coordinate ``j`` changes from ``old`` to ``new``.

    Returns a new array; ``scores`` is not modified.
    """
    if not 0 <= j < data.p:
        raise IndexError(f"coordinate {j} out of range for p={data.p}")
    s = np.asarray(scores, dtype=np.int64)
    if new == old:
        return s.copy()
    return s + (int(new) - int(old)) * data.predictors[:, j].astype(np.int64)


def tabulate(scores, outcomes) -> ScoreHistogram:
    """Tabulate scores by outcome. ``outcomes`` may be a Dataset or a 0/1 array."""
    y = outcomes.outcomes if isinstance(outcomes, Dataset) else np.asarray(outcomes)
    s = np.asarray(scores, dtype=np.int64)
    if s.shape != y.shape:
        raise ValueError(f"scores of shape {s.shape} do not match outcomes of shape {y.shape}")
    if s.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return ScoreHistogram(empty, empty, empty)
    lo = s.min()
    shifted = s - lo
    total = np.bincount(shifted)
    cases = np.bincount(shifted, weights=y).astype(np.int64)
    occupied = np.flatnonzero(total)
    return ScoreHistogram(
        levels=occupied + lo,
        case_counts=cases[occupied],
        control_counts=(total - cases)[occupied],
    )


def concordance_count(h: ScoreHistogram) -> int:
    """Twice the number of concordant pairs plus the number of tied pairs.

    Dividing by ``2 * n1 * n0`` gives the tied AUC. Exact integer arithmetic.
    """
    below = 0
    total = 0
    for n1m, n0m in zip(h.case_counts.tolist(), h.control_counts.tolist()):
        total += n1m * (2 * below + n0m)
        below += n0m
    return total


def strict_concordance_count(h: ScoreHistogram) -> int:
    """Number of case/control pairs in which the case scores strictly higher."""
    below = 0
    total = 0
    for n1m, n0m in zip(h.case_counts.tolist(), h.control_counts.tolist()):
        total += n1m * below
        below += n0m
    return total


def tie_count(h: ScoreHistogram) -> int:
    """Number of case/control pairs with equal scores."""
    return int(np.dot(h.case_counts, h.control_counts))


def _require_classes(n1: int, n0: int):
    if n1 == 0 or n0 == 0:
        raise DegenerateDataError(f"AUC needs at least one case and one control (n1={n1}, n0={n0})")


def auc_from_histogram(h: ScoreHistogram) -> float:
    """Tied AUC from a score histogram in O(M)."""
    n1, n0 = h.n1, h.n0
    _require_classes(n1, n0)
    return concordance_count(h) / (2 * n1 * n0)


def strict_auc_from_histogram(h: ScoreHistogram) -> float:
    """Fraction of pairs with the case strictly above the control (ties earn nothing)."""
    n1, n0 = h.n1, h.n0
    _require_classes(n1, n0)
    return strict_concordance_count(h) / (n1 * n0)


def auc_pairwise(scores, outcomes) -> float:
    """Tied AUC by direct enumeration of all case/control pairs.

    Quadratic in ``n``; intended as a reference for :func:`auc_from_histogram`.
    """
    y = outcomes.outcomes if isinstance(outcomes, Dataset) else np.asarray(outcomes)
    s = np.asarray(scores)
    cases, controls = s[y == 1], s[y == 0]
    _require_classes(len(cases), len(controls))
    diff = cases[:, None] - controls[None, :]
    count = 2 * int(np.count_nonzero(diff > 0)) + int(np.count_nonzero(diff == 0))
    return count / (2 * len(cases) * len(controls))


def auc(scores, outcomes) -> float:
    """Tied AUC of integer scores."""
    return auc_from_histogram(tabulate(scores, outcomes))


def auc_continuous(scores, outcomes) -> float:
    """Tied AUC of real-valued scores via mid-ranks (Mann-Whitney form)."""
    y = outcomes.outcomes if isinstance(outcomes, Dataset) else np.asarray(outcomes)
    s = np.asarray(scores, dtype=float)
    n1 = int(y.sum())
    n0 = len(y) - n1
    _require_classes(n1, n0)
    ranks = rankdata(s)
    return (ranks[y == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0)


def batch_concordance(score_rows: np.ndarray, outcomes: np.ndarray, return_ties: bool = False):
    """Concordance counts (as in :func:`concordance_count`) for many score vectors.

    Parameters
    ----------
    score_rows : int array of shape (C, n)
        One candidate score vector per row. Entries must be nonnegative.
    outcomes : 0/1 array of shape (n,)
    return_ties : bool
        Also return the tied-pair count of each row.

    Returns
    -------
    int64 array of shape (C,), or a pair of them when ``return_ties`` is set
    """
    S = np.asarray(score_rows, dtype=np.int64)
    C, n = S.shape
    if C == 0:
        empty = np.zeros(0, dtype=np.int64)
        return (empty, empty) if return_ties else empty
    width = int(S.max()) + 1
    flat = (S + (np.arange(C, dtype=np.int64) * width)[:, None]).ravel()
    y = np.broadcast_to(np.asarray(outcomes, dtype=np.int64), (C, n)).ravel()
    total = np.bincount(flat, minlength=C * width).reshape(C, width)
    cases = np.bincount(flat[y == 1], minlength=C * width).reshape(C, width)
    controls = total - cases
    below = np.cumsum(controls, axis=1) - controls
    counts = (cases * (2 * below + controls)).sum(axis=1)
    if return_ties:
        return counts, (cases * controls).sum(axis=1)
    return counts
