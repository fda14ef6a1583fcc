"""Batch query strategies.

Every strategy answers the same question: given read access to the feature
matrix, the current head, and the pool state, which ``b`` unlabeled points
should be annotated next? All of them obey one contract — exactly ``b``
distinct indices drawn from the unlabeled set — and share two conventions:

* every tie, anywhere, breaks toward the smaller sample index;
* every random draw comes from an explicit seeded generator.

Strategies are registered by name; the simulator dispatches through
``select``. Only ``balanced_random`` may read oracle labels of unlabeled
points, and it does so through the pool's audited privileged accessor.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, ConfigError, InitializationError
from .geometry import iter_pairwise_blocks
from .linear_head import LinearHead, logits
from .pool import PoolState

log = logging.getLogger(__name__)

_SCORE_BLOCK = 65536


@dataclass
class QueryResult:
    """Ordered selection of unlabeled indices (selection order preserved)."""

    indices: list[int]
    strategy_name: str
    scores: np.ndarray | None = None


@dataclass
class StrategyConfig:
    name: str = "random"
    partitions: int = 10
    pooled_dim: int = 512
    seed: int | None = None

    def validate(self) -> None:
        if self.name not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.name!r}; valid names: {sorted(STRATEGIES)}"
            )
        if self.partitions < 1:
            raise ConfigError("partitions must be >= 1")
        if self.pooled_dim < 1:
            raise ConfigError("pooled_dim must be >= 1")


def _check_budget(b: int, available: int) -> None:
    if b < 0:
        raise BudgetError(f"budget {b} is negative")
    if b > available:
        raise BudgetError(f"budget {b} exceeds {available} unlabeled points")


# ---------------------------------------------------------------------------
# bottom-k selection with exact (value, index) tie-breaking


def _bottomk_positions(values: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k smallest values, ordered by (value, position)."""
    n = len(values)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return np.argsort(values, kind="stable")
    part = np.argpartition(values, k - 1)[:k]
    cutoff = values[part].max()
    cand = np.flatnonzero(values <= cutoff)  # ascending positions
    order = np.argsort(values[cand], kind="stable")[:k]
    return cand[order]


def _blockwise_bottomk(
    score_blocks,
    n: int,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Merge per-block bottom-k into the global bottom-k.

    ``score_blocks`` yields ``(start, scores)`` pieces covering ``[0, n)``
    in order. Returns (values, positions) ordered by (value, position).
    """
    vals_acc: list[np.ndarray] = []
    pos_acc: list[np.ndarray] = []
    for start, scores in score_blocks:
        pos = _bottomk_positions(scores, k)
        vals_acc.append(scores[pos])
        pos_acc.append(pos + start)
    vals = np.concatenate(vals_acc)
    pos = np.concatenate(pos_acc)
    resort = np.lexsort((pos, vals))[:k]
    return vals[resort], pos[resort]


def _logit_score_blocks(head, features, rows, score_fn, block=None):
    if block is None:
        block = _SCORE_BLOCK
    for start in range(0, len(rows), block):
        X = features[rows[start : start + block]]
        Z = logits(head, np.asarray(X, dtype=np.float64))
        yield start, score_fn(Z)


# ---------------------------------------------------------------------------
# random baselines


def random_select(pool: PoolState, b: int, seed) -> QueryResult:
    """Uniformly random unlabeled indices, without replacement."""
    _check_budget(b, len(pool.unlabeled))
    rng = np.random.default_rng(seed)
    picked = rng.choice(pool.unlabeled, size=b, replace=False)
    return QueryResult([int(i) for i in picked], "random")


def balanced_random_select(pool: PoolState, b: int, seed) -> QueryResult:
    """Round-robin over classes, one uniform draw per visit. Cheats:
    requires oracle labels of unlabeled points (audited accessor)."""
    _check_budget(b, len(pool.unlabeled))
    rng = np.random.default_rng(seed)
    labels = pool.peek_unlabeled_labels(pool.unlabeled, "balanced_random")
    queues = []
    for c in range(pool.num_classes):
        members = pool.unlabeled[labels == c]
        queues.append(deque(int(i) for i in rng.permutation(members)))
    picked: list[int] = []
    while len(picked) < b:
        progress = False
        for q in queues:
            if q:
                picked.append(q.popleft())
                progress = True
                if len(picked) == b:
                    break
        if not progress:
            break
    return QueryResult(picked, "balanced_random")


# ---------------------------------------------------------------------------
# uncertainty baselines


def confidence_select(pool: PoolState, head: LinearHead, features: np.ndarray, b: int) -> QueryResult:
    """Smallest top logit (least confidence)."""
    rows = pool.unlabeled
    _check_budget(b, len(rows))
    blocks = _logit_score_blocks(head, features, rows, lambda Z: Z.max(axis=1))
    vals, pos = _blockwise_bottomk(blocks, len(rows), b)
    return QueryResult([int(i) for i in rows[pos]], "confidence", vals)


def margin_select(pool: PoolState, head: LinearHead, features: np.ndarray, b: int) -> QueryResult:
    """Smallest gap between the top logit and the runner-up."""
    rows = pool.unlabeled
    _check_budget(b, len(rows))

    def margins(Z: np.ndarray) -> np.ndarray:
        if Z.shape[1] < 2:
            return np.zeros(len(Z))
        top2 = np.partition(Z, Z.shape[1] - 2, axis=1)[:, -2:]
        return top2[:, 1] - top2[:, 0]

    blocks = _logit_score_blocks(head, features, rows, margins)
    vals, pos = _blockwise_bottomk(blocks, len(rows), b)
    return QueryResult([int(i) for i in rows[pos]], "margin", vals)


# ---------------------------------------------------------------------------
# boundary-distance strategies


def mase_select(pool: PoolState, head: LinearHead, features: np.ndarray, b: int) -> QueryResult:
    """The b unlabeled points nearest any decision boundary.

    Boundary distances are fixed within a round, so the iterated argmin of
    the sequential formulation collapses to a bottom-b selection.
    """
    rows = pool.unlabeled
    _check_budget(b, len(rows))
    blocks = (
        (start, dist.min(axis=1))
        for start, _, dist in iter_pairwise_blocks(head, features, rows)
    )
    vals, pos = _blockwise_bottomk(blocks, len(rows), b)
    return QueryResult([int(i) for i in rows[pos]], "mase", vals)


def base_select(pool: PoolState, head: LinearHead, features: np.ndarray, b: int) -> QueryResult:
    """Class-balanced boundary selection.

    Passes over classes ``0..C-1`` round-robin; each visit takes the
    not-yet-selected unlabeled point nearest that class's boundary, until
    exactly ``b`` points are chosen. Per class only the ``min(b, n)``
    nearest candidates can ever be needed, so one blocked pass computes a
    candidate list per class and the round-robin walks pointers.
    """
    rows = pool.unlabeled
    n = len(rows)
    _check_budget(b, n)
    if b == 0:
        return QueryResult([], "base")
    C = head.num_classes
    k = min(n, b)

    cand_vals: list[list[np.ndarray]] = [[] for _ in range(C)]
    cand_pos: list[list[np.ndarray]] = [[] for _ in range(C)]
    for start, p, dist in iter_pairwise_blocks(head, features, rows):
        row_min = dist.min(axis=1)
        for c in range(C):
            col = np.where(p == c, row_min, dist[:, c])
            pos = _bottomk_positions(col, k)
            cand_vals[c].append(col[pos])
            cand_pos[c].append(pos + start)

    per_class: list[np.ndarray] = []
    for c in range(C):
        vals = np.concatenate(cand_vals[c])
        pos = np.concatenate(cand_pos[c])
        order = np.lexsort((pos, vals))[:k]
        per_class.append(pos[order])

    taken = np.zeros(n, dtype=bool)
    pointers = [0] * C
    chosen: list[int] = []
    while len(chosen) < b:
        progress = False
        for c in range(C):
            cand = per_class[c]
            ptr = pointers[c]
            while ptr < len(cand) and taken[cand[ptr]]:
                ptr += 1
            pointers[c] = ptr
            if ptr >= len(cand):
                continue  # no remaining candidate for this class
            taken[cand[ptr]] = True
            chosen.append(int(rows[cand[ptr]]))
            pointers[c] = ptr + 1
            progress = True
            if len(chosen) == b:
                break
        if not progress:
            break
    return QueryResult(chosen, "base")


# ---------------------------------------------------------------------------
# coreset (k-center) strategies


def _greedy_kcenter(
    X_pool: np.ndarray, X_centers: np.ndarray, b: int, center_block: int = 1024
) -> list[int]:
    """Greedy farthest-point positions within ``X_pool``.

    Existing centers seed the min-distance field; with no centers the field
    starts at +inf so the first pick is the smallest position.
    """
    X_pool = np.asarray(X_pool, dtype=np.float64)
    mind = np.full(len(X_pool), np.inf)
    pool_sq = np.einsum("ij,ij->i", X_pool, X_pool)
    for start in range(0, len(X_centers), center_block):
        blk = np.asarray(X_centers[start : start + center_block], dtype=np.float64)
        d2 = pool_sq[:, None] + np.einsum("ij,ij->i", blk, blk) - 2.0 * (X_pool @ blk.T)
        np.minimum(mind, d2.min(axis=1), out=mind)
    picks: list[int] = []
    for _ in range(b):
        pick = int(np.argmax(mind))
        picks.append(pick)
        gap = pool_sq + pool_sq[pick] - 2.0 * (X_pool @ X_pool[pick])
        np.minimum(mind, gap, out=mind)
        mind[pick] = -np.inf  # a center cannot be re-picked even on all-zero ties
    return picks


def coreset_select(pool: PoolState, features: np.ndarray, b: int) -> QueryResult:
    """Greedy k-center: repeatedly take the unlabeled point farthest from
    all centers, starting from the labeled set (2-approximation)."""
    _check_budget(b, len(pool.unlabeled))
    labeled = pool.labeled_indices()
    if len(labeled) == 0:
        raise InitializationError("coreset needs at least one labeled center")
    rows = pool.unlabeled
    picks = _greedy_kcenter(features[rows], features[labeled], b)
    return QueryResult([int(rows[i]) for i in picks], "coreset")


def _paired_partitions(
    pool: PoolState, p: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random p-way partitions of unlabeled and labeled, paired index-wise.

    Each part is re-sorted ascending so within-partition tie-breaking stays
    on sample index. A single partition is the identity and draws nothing
    from the generator (so p=1 degenerates exactly to the unpartitioned
    strategy).
    """
    if p == 1:
        return [(pool.unlabeled, pool.labeled_indices())]
    parts_u = [np.sort(a) for a in np.array_split(rng.permutation(pool.unlabeled), p)]
    parts_l = [np.sort(a) for a in np.array_split(rng.permutation(pool.labeled_indices()), p)]
    return list(zip(parts_u, parts_l))


def _partition_budgets(b: int, p: int, capacities: list[int]) -> list[int]:
    """b/p per partition, remainder one-each to the first b mod p; any
    partition short on capacity spills its deficit to the others."""
    budgets = [b // p + (1 if i < b % p else 0) for i in range(p)]
    deficit = 0
    for i in range(p):
        if budgets[i] > capacities[i]:
            deficit += budgets[i] - capacities[i]
            budgets[i] = capacities[i]
    if deficit:
        log.warning("partition budgets infeasible; redistributing %d picks", deficit)
        while deficit:
            placed = False
            for i in range(p):
                if deficit and budgets[i] < capacities[i]:
                    budgets[i] += 1
                    deficit -= 1
                    placed = True
            if not placed:
                raise BudgetError("partitions cannot absorb the requested budget")
    return budgets


def partitioned_coreset_select(
    pool: PoolState, features: np.ndarray, b: int, p: int, seed
) -> QueryResult:
    """Coreset run independently inside p random partitions (b/p each)."""
    _check_budget(b, len(pool.unlabeled))
    rng = np.random.default_rng(seed)
    pairs = _paired_partitions(pool, p, rng)
    budgets = _partition_budgets(b, p, [len(u) for u, _ in pairs])
    picked: list[int] = []
    for (part_u, part_l), sub_b in zip(pairs, budgets):
        if sub_b == 0:
            continue
        picks = _greedy_kcenter(features[part_u], features[part_l], sub_b)
        picked.extend(int(part_u[i]) for i in picks)
    return QueryResult(picked, "partitioned_coreset")


# ---------------------------------------------------------------------------
# gradient-embedding strategies


def badge_embedding(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """Cross-entropy gradient w.r.t. the weight matrix at the predicted label.

    For features ``h`` and softmax probabilities ``q`` the gradient rows are
    ``(q - onehot(argmax q)) h^T``; flattened row-major to length C*d'.
    Its norm encodes uncertainty and its direction, feature diversity.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    Z = logits(head, X)
    Z = Z - Z.max(axis=1, keepdims=True)
    q = np.exp(Z)
    q /= q.sum(axis=1, keepdims=True)
    yhat = np.argmax(Z, axis=1)
    q[np.arange(len(q)), yhat] -= 1.0
    emb = (q[:, :, None] * X[:, None, :]).reshape(len(X), -1)
    return emb[0] if single else emb


def kmeanspp_seed(points: np.ndarray, b: int, seed) -> list[int]:
    """k-means++ seeding: first center uniform, then D^2 sampling.

    When every remaining point coincides with a chosen center (zero total
    mass) the next pick falls back to uniform over the unchosen.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    _check_budget(b, n)
    if b == 0:
        return []
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    chosen_mask = np.zeros(n, dtype=bool)
    chosen_mask[first] = True
    d2 = np.einsum("ij,ij->i", points - points[first], points - points[first])
    for _ in range(b - 1):
        cum = np.cumsum(d2)
        total = cum[-1]
        if total > 0:
            pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
        else:
            pick = int(rng.choice(np.flatnonzero(~chosen_mask)))
        chosen.append(pick)
        chosen_mask[pick] = True
        gap = points - points[pick]
        np.minimum(d2, np.einsum("ij,ij->i", gap, gap), out=d2)
        d2[chosen_mask] = 0.0
    return chosen


def badge_select(
    pool: PoolState, head: LinearHead, features: np.ndarray, b: int, seed
) -> QueryResult:
    """k-means++ seeding over last-layer gradient embeddings."""
    rows = pool.unlabeled
    _check_budget(b, len(rows))
    emb = badge_embedding(head, features[rows])
    picks = kmeanspp_seed(emb, b, seed)
    return QueryResult([int(rows[i]) for i in picks], "badge")


def _pool_windows(emb: np.ndarray, pooled_dim: int) -> np.ndarray:
    """Average contiguous windows of size ceil(L / pooled_dim); identity
    when pooled_dim >= L."""
    L = emb.shape[1]
    if pooled_dim >= L:
        return emb
    window = math.ceil(L / pooled_dim)
    starts = np.arange(0, L, window)
    sums = np.add.reduceat(emb, starts, axis=1)
    sizes = np.minimum(starts + window, L) - starts
    return sums / sizes


def partitioned_badge_select(
    pool: PoolState,
    head: LinearHead,
    features: np.ndarray,
    b: int,
    p: int,
    pooled_dim: int,
    seed,
) -> QueryResult:
    """BADGE inside p random partitions, on window-averaged embeddings."""
    _check_budget(b, len(pool.unlabeled))
    rng = np.random.default_rng(seed)
    pairs = _paired_partitions(pool, p, rng)
    budgets = _partition_budgets(b, p, [len(u) for u, _ in pairs])
    picked: list[int] = []
    for (part_u, _), sub_b in zip(pairs, budgets):
        if sub_b == 0:
            continue
        emb = _pool_windows(badge_embedding(head, features[part_u]), pooled_dim)
        picks = kmeanspp_seed(emb, sub_b, rng)
        picked.extend(int(part_u[i]) for i in picks)
    return QueryResult(picked, "partitioned_badge")


# ---------------------------------------------------------------------------
# balancing sampler


def balancing_select(
    pool: PoolState, head: LinearHead, features: np.ndarray, b: int
) -> QueryResult:
    """Target the least-labeled class; pick points near its centroid and far
    from the others, one at a time.

    Scoring is head-independent: centroids are per-class means of labeled
    features. Picks are pseudo-labeled with the target class for in-batch
    counting only (no oracle access). Classes without any labeled example
    have no centroid and are skipped as targets.
    """
    rows = pool.unlabeled
    _check_budget(b, len(rows))
    labeled = pool.labeled_indices()
    if len(labeled) == 0:
        raise InitializationError("balancing sampler needs labeled examples")
    C = pool.num_classes
    lab_labels = pool.labeled_labels()
    counts = np.bincount(lab_labels, minlength=C).astype(np.int64)
    present = np.flatnonzero(counts > 0)
    X_lab = np.asarray(features[labeled], dtype=np.float64)
    centroids = np.stack([X_lab[lab_labels == c].mean(axis=0) for c in present])

    X_u = np.asarray(features[rows], dtype=np.float64)
    d2 = (
        np.einsum("ij,ij->i", X_u, X_u)[:, None]
        + np.einsum("ij,ij->i", centroids, centroids)
        - 2.0 * (X_u @ centroids.T)
    )
    D = np.sqrt(np.maximum(d2, 0.0))
    if len(present) > 1:
        two = np.partition(D, 1, axis=1)[:, :2]
        amin = np.argmin(D, axis=1)

    picked: list[int] = []
    available = np.ones(len(rows), dtype=bool)
    for _ in range(b):
        tpos = int(np.argmin(counts[present]))  # ties: smaller class index
        if len(present) > 1:
            other = np.where(amin == tpos, two[:, 1], two[:, 0])
            score = D[:, tpos] - other
        else:
            score = D[:, tpos].copy()
        score[~available] = np.inf
        pick = int(np.argmin(score))
        picked.append(int(rows[pick]))
        available[pick] = False
        counts[present[tpos]] += 1
    return QueryResult(picked, "balancing")


# ---------------------------------------------------------------------------
# dispatch


STRATEGIES = {
    "random": {"rng": True, "head": False},
    "balanced_random": {"rng": True, "head": False},
    "coreset": {"rng": False, "head": False},
    "partitioned_coreset": {"rng": True, "head": False},
    "badge": {"rng": True, "head": True},
    "partitioned_badge": {"rng": True, "head": True},
    "confidence": {"rng": False, "head": True},
    "margin": {"rng": False, "head": True},
    "balancing": {"rng": False, "head": False},
    "mase": {"rng": False, "head": True},
    "base": {"rng": False, "head": True},
}


def select(
    pool: PoolState,
    head: LinearHead | None,
    features: np.ndarray,
    b: int,
    config: StrategyConfig,
    rng=None,
) -> QueryResult:
    """Run the named strategy. ``rng`` (generator or seed) overrides
    ``config.seed`` for strategies that draw randomness."""
    config.validate()
    seed = rng if rng is not None else config.seed
    name = config.name
    if STRATEGIES[name]["head"] and head is None:
        raise ConfigError(f"strategy {name!r} needs a trained head")
    if name == "random":
        return random_select(pool, b, seed)
    if name == "balanced_random":
        return balanced_random_select(pool, b, seed)
    if name == "coreset":
        return coreset_select(pool, features, b)
    if name == "partitioned_coreset":
        return partitioned_coreset_select(pool, features, b, config.partitions, seed)
    if name == "badge":
        return badge_select(pool, head, features, b, seed)
    if name == "partitioned_badge":
        return partitioned_badge_select(
            pool, head, features, b, config.partitions, config.pooled_dim, seed
        )
    if name == "confidence":
        return confidence_select(pool, head, features, b)
    if name == "margin":
        return margin_select(pool, head, features, b)
    if name == "balancing":
        return balancing_select(pool, head, features, b)
    if name == "mase":
        return mase_select(pool, head, features, b)
    if name == "base":
        return base_select(pool, head, features, b)
    raise ConfigError(f"unknown strategy {name!r}")  # unreachable after validate
