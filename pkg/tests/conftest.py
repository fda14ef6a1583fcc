import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `import oracles` work

from alkit.linear_head import LinearHead
from alkit.pool import PoolState


def random_head(rng: np.random.Generator, num_classes: int, dim: int) -> LinearHead:
    return LinearHead(rng.normal(size=(num_classes, dim)), rng.normal(size=num_classes) * 0.1)


def quick_pool(
    rng: np.random.Generator,
    n: int,
    num_classes: int,
    dim: int,
    n_labeled: int,
    single_class_labeled: bool = False,
    duplicate_rows: bool = False,
) -> tuple[np.ndarray, PoolState]:
    """A bare pool for strategy tests: no val/test splits, direct oracle."""
    features = rng.normal(size=(n, dim)).astype(np.float32)
    if duplicate_rows and n >= 4:
        features[1] = features[0]
        features[n // 2] = features[0]
    labels = rng.integers(0, num_classes, size=n).astype(np.int64)
    present = min(n, num_classes)  # when n < C some classes stay empty
    labels[:present] = np.arange(present)
    if single_class_labeled:
        members = np.flatnonzero(labels == labels[0])
        picked = members[: max(1, min(n_labeled, len(members)))]
    else:
        picked = rng.choice(n, size=n_labeled, replace=False)
    unlabeled = np.setdiff1d(np.arange(n, dtype=np.int64), picked)
    state = PoolState(
        n_total=n,
        num_classes=num_classes,
        labeled=[int(i) for i in picked],
        unlabeled=unlabeled,
        val_idx=np.empty(0, dtype=np.int64),
        test_idx=np.empty(0, dtype=np.int64),
        round=0,
        _oracle=labels,
    )
    return features, state


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
