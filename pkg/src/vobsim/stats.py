"""Figures of merit: AUC, one-shot MRMC variance, d', and reader construction.

The variance of the reader-averaged AUC uses the unbiased U-statistic
moment decomposition for a fully-crossed reader-by-case design: the eight
success moments (same/different reader x same/different absent case x
same/different present case) combined with their count coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfinv

from . import observer
from .errors import DomainError, SaturationError
from .stackgen import ImageStack

__all__ = [
    "CaseScores",
    "McmcInput",
    "McmcResult",
    "auc",
    "mrmc_one_shot",
    "d_prime",
    "make_readers",
]


@dataclass
class CaseScores:
    """One reader's scalar decision variables with truth labels."""

    scores: np.ndarray
    labels: np.ndarray  # True for signal-present
    reader_id: int = 0

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise DomainError("scores and labels must be 1D arrays of equal length")
        if not np.all(np.isfinite(self.scores)):
            raise DomainError("scores must be finite")


@dataclass
class McmcInput:
    """Scores from several readers over one common, fully-crossed case set."""

    readers: list[CaseScores]

    def __post_init__(self):
        if not self.readers:
            raise DomainError("at least one reader is required")
        ref = self.readers[0].labels
        for r in self.readers[1:]:
            if r.labels.shape != ref.shape or not np.array_equal(r.labels, ref):
                raise DomainError("all readers must score the same labeled case set")


@dataclass
class McmcResult:
    auc_mean: float
    auc_variance: float
    error_bar: float  # 2 * std, a 95% confidence half-width
    d_prime: float
    n_readers: int
    n_absent: int
    n_present: int
    single_reader_fallback: bool = False


def _success_matrix(scores: CaseScores) -> np.ndarray:
    """psi(absent_i, present_j): 1 if present wins, 1/2 on ties, else 0."""
    pos = scores.scores[scores.labels]
    neg = scores.scores[~scores.labels]
    if pos.size == 0 or neg.size == 0:
        raise DomainError("need at least one case per class")
    diff = pos[None, :] - neg[:, None]
    return np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))


def auc(scores: CaseScores) -> float:
    """Mann-Whitney AUC with the tie convention psi = 1/2."""
    return float(_success_matrix(scores).mean())


def _one_shot_variance(s: np.ndarray) -> float:
    """Unbiased variance of the reader-averaged AUC from the success tensor.

    s has shape (R, n0, n1).  The eight moment sums are built from marginal
    sums by inclusion-exclusion; combined with their coefficients the
    estimator reduces to auc_mean^2 minus the unbiased estimate of mu^2
    (product over fully distinct readers and cases).
    """
    r, n0, n1 = s.shape
    total = s.sum()
    s2 = (s * s).sum()
    sum_a2 = (s.sum(axis=(1, 2)) ** 2).sum()  # same reader
    c = s.sum(axis=2)  # (R, n0)
    d = s.sum(axis=1)  # (R, n1)
    p = s.sum(axis=0)  # (n0, n1)
    sum_c2 = (c * c).sum()
    sum_d2 = (d * d).sum()
    sum_p2 = (p * p).sum()
    sum_g2 = (c.sum(axis=0) ** 2).sum()  # same absent case
    sum_h2 = (d.sum(axis=0) ** 2).sum()  # same present case

    auc_mean = total / (r * n0 * n1)
    if r >= 2:
        # Sum of products over fully distinct (reader, absent, present) tuples.
        distinct = (
            total * total
            - sum_a2 - sum_g2 - sum_h2
            + sum_c2 + sum_d2 + sum_p2
            - s2
        )
        count = r * (r - 1) * n0 * (n0 - 1) * n1 * (n1 - 1)
    else:
        # Single reader: distinct cases only.
        distinct = sum_a2 - sum_c2 - sum_d2 + s2
        count = r * n0 * (n0 - 1) * n1 * (n1 - 1)
    if count == 0:
        raise DomainError("variance needs at least 2 cases per class")
    return max(0.0, auc_mean * auc_mean - distinct / count)


def mrmc_one_shot(inp: McmcInput) -> McmcResult:
    """Reader-averaged AUC with its one-shot MRMC variance and d'.

    With a single reader the variance falls back to the case-only
    U-statistic variance and the result is flagged accordingly.
    """
    s = np.stack([_success_matrix(r) for r in inp.readers])
    r, n0, n1 = s.shape
    variance = _one_shot_variance(s)
    auc_mean = float(s.mean())
    try:
        dp = d_prime(auc_mean)
    except SaturationError:
        dp = float("inf") if auc_mean >= 1.0 else float("-inf")
    return McmcResult(
        auc_mean=auc_mean,
        auc_variance=variance,
        error_bar=2.0 * float(np.sqrt(variance)),
        d_prime=dp,
        n_readers=r,
        n_absent=n0,
        n_present=n1,
        single_reader_fallback=(r < 2),
    )


def d_prime(auc_value: float) -> float:
    """Detectability index d' = 2 * erfinv(2*AUC - 1)."""
    if not 0.0 < auc_value < 1.0:
        raise SaturationError(f"AUC of {auc_value!r} has no finite d'")
    return float(2.0 * erfinv(2.0 * auc_value - 1.0))


def _class_indices(stacks) -> tuple[np.ndarray, np.ndarray]:
    labels = np.array([s.signal_present for s in stacks])
    return np.nonzero(~labels)[0], np.nonzero(labels)[0]


def make_readers(
    stacks: list[ImageStack],
    n_readers: int = 4,
    master_seed: int = 0,
    *,
    channels: observer.LgChannelSet | None = None,
    train_fraction: float = 0.8,
    ridge_scale: float = observer.DEFAULT_RIDGE_SCALE,
    reader_perceive=None,
) -> tuple[list[observer.ChoModel], list[CaseScores]]:
    """Train virtual readers and score them on a common held-out test half.

    Cases are split 50/50 per class into a training pool and a fixed test
    half (the one-shot estimator assumes a fully-crossed reader-by-case
    design, so the test half is shared by all readers).  Each reader trains
    on its own seeded random subset of the pool; ``reader_perceive``, when
    given, maps a reader index to that reader's perceived corpus (used for
    the MC method, whose perception is stochastic per reader).
    """
    if n_readers < 1:
        raise DomainError(f"n_readers must be at least 1, got {n_readers}")
    if not 0 < train_fraction <= 1:
        raise DomainError(f"train_fraction must be in (0, 1], got {train_fraction!r}")
    idx_absent, idx_present = _class_indices(stacks)
    if idx_absent.size < 4 or idx_present.size < 4:
        raise DomainError("need at least 4 cases per class for a disjoint split")

    rng_split = np.random.default_rng([int(master_seed), 0x5B11])
    pools, tests = [], []
    for idx in (idx_absent, idx_present):
        perm = rng_split.permutation(idx)
        half = idx.size // 2
        pools.append(perm[:half])
        tests.append(perm[half:])
    test_idx = np.concatenate(tests)
    test_labels = np.array([stacks[i].signal_present for i in test_idx])
    channels = channels_for(stacks, channels)

    models, reader_scores = [], []
    for reader in range(n_readers):
        rng_r = np.random.default_rng([int(master_seed), 0x4EAD, reader])
        corpus = stacks if reader_perceive is None else reader_perceive(reader)
        train_idx = []
        for pool in pools:
            n_take = max(2, int(round(train_fraction * pool.size)))
            train_idx.extend(rng_r.choice(pool, size=min(n_take, pool.size), replace=False))
        model = observer.train([corpus[i] for i in train_idx], channels, ridge_scale)
        scores = np.array([observer.score(model, corpus[i]) for i in test_idx])
        models.append(model)
        reader_scores.append(CaseScores(scores=scores, labels=test_labels, reader_id=reader))
    return models, reader_scores


def channels_for(stacks, channels: observer.LgChannelSet | None) -> observer.LgChannelSet:
    """Default channel set matched to the corpus slice size."""
    if channels is not None:
        return channels
    return observer.make_channels(stacks[0].nx, stacks[0].ny)
