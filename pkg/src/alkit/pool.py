"""Sample-index bookkeeping for an active-learning run.

A ``PoolState`` partitions ``[0, n)`` into the labeled set (insertion
order preserved, so each label's provenance round is reconstructible), the
unlabeled set (kept sorted ascending), and fixed validation/test splits.

Labels come from an in-memory oracle. Strategies may read labels of
*labeled* points freely; reading labels of unlabeled points is a privilege
reserved for the one cheating baseline and every such access is recorded in
an audit log so tests can prove honest strategies never peek.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetError,
    ConfigError,
    StrategyContractViolation,
    UndefinedMetricError,
)


@dataclass
class ClassDistribution:
    """Non-negative per-class counts."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class OracleAccess:
    """One privileged read of unlabeled-point labels."""

    strategy: str
    round: int
    num_indices: int


@dataclass
class PoolState:
    """Mutable experiment state; one simulator owns and mutates it."""

    n_total: int
    num_classes: int
    labeled: list[int]
    unlabeled: np.ndarray  # sorted ascending
    val_idx: np.ndarray
    test_idx: np.ndarray
    round: int
    _oracle: np.ndarray = field(repr=False)
    oracle_audit: list[OracleAccess] = field(default_factory=list)

    # -- label access ----------------------------------------------------

    def labeled_indices(self) -> np.ndarray:
        return np.asarray(self.labeled, dtype=np.int64)

    def labeled_labels(self) -> np.ndarray:
        """Labels of already-annotated points (freely visible)."""
        return self._oracle[self.labeled_indices()]

    def val_labels(self) -> np.ndarray:
        return self._oracle[self.val_idx]

    def test_labels(self) -> np.ndarray:
        return self._oracle[self.test_idx]

    def peek_unlabeled_labels(self, indices: np.ndarray, strategy: str) -> np.ndarray:
        """Privileged accessor: read oracle labels of unlabeled points.

        Only the cheating balanced-random baseline may call this; every call
        is appended to ``oracle_audit``.
        """
        indices = np.asarray(indices, dtype=np.int64)
        self.oracle_audit.append(OracleAccess(strategy, self.round, len(indices)))
        return self._oracle[indices]


def split(
    n: int,
    labels: np.ndarray,
    val_frac: float,
    test_idx: np.ndarray,
    seed,
) -> PoolState:
    """Carve the validation split and return the round ``-1`` pool state.

    Validation indices are drawn uniformly at random from the non-test
    indices; everything else is the AL train pool, initially all unlabeled.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != n:
        raise ConfigError(f"labels has {len(labels)} entries for n={n}")
    test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))
    if len(test_idx) and (test_idx[0] < 0 or test_idx[-1] >= n):
        raise ConfigError("test indices out of range")
    if len(np.unique(test_idx)) != len(test_idx):
        raise ConfigError("duplicate test indices")
    if not 0.0 < val_frac < 1.0:
        raise ConfigError(f"val_frac must be in (0, 1), got {val_frac}")

    candidates = np.setdiff1d(np.arange(n, dtype=np.int64), test_idx)
    n_val = int(round(val_frac * len(candidates)))
    if n_val < 1:
        raise ConfigError(
            f"val_frac={val_frac} yields an empty validation split for "
            f"{len(candidates)} train candidates"
        )
    if n_val >= len(candidates):
        raise ConfigError("validation split would consume the whole train pool")
    rng = np.random.default_rng(seed)
    val_idx = np.sort(rng.choice(candidates, size=n_val, replace=False))
    train_idx = np.setdiff1d(candidates, val_idx)
    return PoolState(
        n_total=n,
        num_classes=int(labels.max()) + 1,
        labeled=[],
        unlabeled=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        round=-1,
        _oracle=labels,
    )


def seed_initial(pool: PoolState, m: int, seed) -> PoolState:
    """Annotate ``m`` uniformly random points; the round-0 state."""
    if m > len(pool.unlabeled):
        raise BudgetError(
            f"initial pool size {m} exceeds {len(pool.unlabeled)} unlabeled points"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(pool.unlabeled, size=m, replace=False) if m else np.empty(0, np.int64)
    pool.labeled = [int(i) for i in picked]
    pool.unlabeled = np.setdiff1d(pool.unlabeled, picked)
    pool.round = 0
    return pool


def commit_query(pool: PoolState, query, expected_size: int | None = None) -> PoolState:
    """Move a query's indices from unlabeled to labeled and advance the round.

    Violations (duplicates, non-unlabeled indices, wrong batch size) are
    fatal and name the offending strategy.
    """
    name = getattr(query, "strategy_name", "<unknown>")
    indices = np.asarray(query.indices, dtype=np.int64)
    if expected_size is not None and len(indices) != expected_size:
        raise StrategyContractViolation(
            f"strategy {name!r} returned {len(indices)} indices, expected {expected_size}"
        )
    uniq, first_dup = np.unique(indices, return_counts=True)
    if len(uniq) != len(indices):
        dup = int(uniq[first_dup > 1][0])
        raise StrategyContractViolation(
            f"strategy {name!r} returned duplicate index {dup}"
        )
    member = np.isin(indices, pool.unlabeled, assume_unique=False)
    if not member.all():
        bad = int(indices[~member][0])
        raise StrategyContractViolation(
            f"strategy {name!r} selected index {bad} which is not unlabeled"
        )
    pool.labeled.extend(int(i) for i in indices)
    pool.unlabeled = np.setdiff1d(pool.unlabeled, indices)
    pool.round += 1
    return pool


# ---------------------------------------------------------------------------
# class-distribution metrics


def imbalance_ratio(dist: ClassDistribution) -> tuple[float, bool]:
    """Most-sampled over least-sampled class count.

    An empty class would make the ratio infinite; the denominator is clamped
    to 1 and the returned flag set instead, so plots stay finite.
    """
    if dist.total == 0:
        raise UndefinedMetricError("imbalance ratio of an empty distribution")
    counts = dist.counts
    lo = int(counts.min())
    return float(counts.max()) / float(max(lo, 1)), lo == 0


def entropy(dist: ClassDistribution) -> float:
    """Shannon entropy of class proportions, in nats (ceiling ``ln C``)."""
    if dist.total == 0:
        raise UndefinedMetricError("entropy of an empty distribution")
    p = dist.counts[dist.counts > 0] / dist.total
    return float(-np.sum(p * np.log(p)))


def class_histogram(pool: PoolState) -> tuple[ClassDistribution, np.ndarray]:
    """Labeled-set class counts, sorted ascending, plus the raw vector.

    The sorted form is what class-distribution histograms plot (least- to
    most-queried class).
    """
    counts = np.bincount(pool.labeled_labels(), minlength=pool.num_classes)
    return ClassDistribution(np.sort(counts)), counts


def max_entropy(num_classes: int) -> float:
    return math.log(num_classes)
