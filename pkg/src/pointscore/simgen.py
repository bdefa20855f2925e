"""Seeded generators for the three simulation designs and the null model.

Every generator is a pure function of its :class:`SimConfig`; the seed may
be an int or a :class:`numpy.random.SeedSequence`, so replicate streams can
be derived with ``SeedSequence([base, setting, n, replicate])``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import expit

from .core import Dataset

SETTINGS = ("s1", "s2", "s3", "null_model")
SETTING_IDS = {name: i + 1 for i, name in enumerate(SETTINGS)}


@dataclass(frozen=True)
class SimConfig:
    """Parameters for one simulated sample.

    ``p`` defaults to 20 for the three designs and is required for the null
    model. ``rho`` and ``contamination`` only affect Setting 2;
    ``outcome_rate`` only affects Setting 3.
    """

    setting: str
    n: int
    seed: Union[int, np.random.SeedSequence] = 0
    p: Optional[int] = None
    rho: float = 0.9
    contamination: float = 0.25
    outcome_rate: float = 0.4

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; choose from {SETTINGS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.setting == "null_model" and (self.p is None or self.p < 1):
            raise ValueError("the null model needs p >= 1")
        if self.setting in ("s2", "s3") and self.p not in (None, 20):
            raise ValueError(f"setting {self.setting} has a fixed design with p = 20")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """A generated dataset plus per-subject latent diagnostics."""

    data: Dataset
    diagnostics: dict = field(default_factory=dict)


def exchangeable_normal(rng: np.random.Generator, n: int, dim: int, rho: float,
                        mean: float = 0.0) -> np.ndarray:
    """Draw ``n`` rows from N(mean, Sigma) with unit variances and common correlation ``rho``.

    Uses the one-factor form ``sqrt(rho) * Z0 + sqrt(1 - rho) * Zj``; requires ``0 <= rho <= 1``.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("factor construction needs 0 <= rho <= 1")
    common = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, dim))
    return mean + np.sqrt(rho) * common + np.sqrt(1.0 - rho) * own


def _dataset(y, X, prefix="x") -> Dataset:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Dataset(y, X, tuple(f"{prefix}{j + 1}" for j in range(X.shape[1])))


def gen_setting1(cfg: SimConfig) -> LabeledSample:
    """Independent sparse-signal logistic design.

    Predictors threshold independent standard normals at zero and
    ``P(Y=1 | X) = expit(-2 + X1 + ... + X6)``. With ``p < 6`` the outcome still
    uses six signal columns but only the first ``p`` are returned.
    """
    rng = cfg.rng()
    p = 20 if cfg.p is None else cfg.p
    latent = rng.standard_normal((cfg.n, max(p, 6)))
    X = (latent > 0).astype(np.int8)
    prob = expit(-2.0 + X[:, :6].sum(axis=1))
    y = (rng.random(cfg.n) < prob).astype(np.int8)
    return LabeledSample(_dataset(y, X[:, :p]), {"risk": prob})


def gen_setting2(cfg: SimConfig) -> LabeledSample:
    """Correlated Gaussian-to-binary design with outliers.

    Nineteen exchangeable latents, a twentieth equal to their sum times an
    N(1, 1) multiplier, ``Y = 1{sum >= 0}``; each subject is then contaminated
    with probability ``cfg.contamination``, which replaces all twenty latents
    by independent N(-1, 1) draws and sets ``Y = 1``.
    """
    rng = cfg.rng()
    n = cfg.n
    latent = np.empty((n, 20))
    latent[:, :19] = exchangeable_normal(rng, n, 19, cfg.rho)
    total = latent[:, :19].sum(axis=1)
    multiplier = rng.normal(1.0, 1.0, n)
    latent[:, 19] = total * multiplier
    y = (total >= 0).astype(np.int8)
    contaminated = rng.random(n) < cfg.contamination
    k = int(contaminated.sum())
    latent[contaminated] = rng.normal(-1.0, 1.0, (k, 20))
    y[contaminated] = 1
    X = (latent > 0).astype(np.int8)
    return LabeledSample(
        _dataset(y, X),
        {"contaminated": contaminated, "latent_x20": latent[:, 19].copy()},
    )


def gen_setting3(cfg: SimConfig) -> LabeledSample:
    """Signal-decoy design with outliers.

    Columns are five signal, five decoy, then ten noise predictors. Controls
    get a single randomly placed decoy. Cases fall into three branches with
    probabilities 0.5 / 0.4 / 0.1: signal latents centred at +2 with no decoys;
    signal latents centred at -2 with all five decoys; or independent
    latents centred at -1 (signal and noise) with no decoys. The
    ``branch`` diagnostic is 0 for controls and 1-3 for the case branches.
    """
    rng = cfg.rng()
    n = cfg.n
    y = (rng.random(n) < cfg.outcome_rate).astype(np.int8)
    case_branch = rng.choice(3, size=n, p=[0.5, 0.4, 0.1]) + 1
    branch = np.where(y == 1, case_branch, 0)

    signal = exchangeable_normal(rng, n, 5, 0.9)
    noise = exchangeable_normal(rng, n, 10, 0.9)
    independent = rng.standard_normal((n, 15)) - 1.0
    signal[branch == 1] += 2.0
    signal[branch == 2] -= 2.0
    third = branch == 3
    signal[third] = independent[third, :5]
    noise[third] = independent[third, 5:]

    decoy = np.zeros((n, 5), dtype=np.int8)
    position = rng.integers(0, 5, size=n)
    controls = np.flatnonzero(y == 0)
    decoy[controls, position[controls]] = 1
    decoy[branch == 2] = 1

    X = np.hstack([(signal > 0).astype(np.int8), decoy, (noise > 0).astype(np.int8)])
    names = tuple([f"signal{j}" for j in range(1, 6)] + [f"decoy{j}" for j in range(1, 6)]
                  + [f"noise{j}" for j in range(1, 11)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = Dataset(y, X, names)
    return LabeledSample(data, {"branch": branch})


def gen_null(cfg: SimConfig) -> LabeledSample:
    """Outcome and all predictors are independent fair coin flips."""
    rng = cfg.rng()
    X = rng.integers(0, 2, size=(cfg.n, cfg.p), dtype=np.int8)
    y = rng.integers(0, 2, size=cfg.n, dtype=np.int8)
    return LabeledSample(_dataset(y, X))


GENERATORS = {"s1": gen_setting1, "s2": gen_setting2, "s3": gen_setting3, "null_model": gen_null}


def generate(cfg: SimConfig) -> LabeledSample:
    return GENERATORS[cfg.setting](cfg)


def train_test_split(sample, fraction: float, seed=0):
    """Split rows at random into ``round(fraction * n)`` training and the rest test.

    Accepts a :class:`LabeledSample` or a :class:`Dataset`. A partition missing
    one outcome class only triggers a warning.
    """
    data = sample.data if isinstance(sample, LabeledSample) else sample
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    n_train = int(round(fraction * data.n))
    if n_train < 1 or n_train >= data.n:
        raise ValueError(f"fraction {fraction} leaves an empty partition for n={data.n}")
    order = np.random.default_rng(seed).permutation(data.n)
    train, test = data.subset(np.sort(order[:n_train])), data.subset(np.sort(order[n_train:]))
    for label, part in (("training", train), ("test", test)):
        if part.n1 == 0 or part.n0 == 0:
            warnings.warn(f"{label} partition lacks one outcome class", stacklevel=2)
    return train, test
