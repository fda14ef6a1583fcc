"""Feature-space distances to linear decision boundaries.

For a softmax linear head the decision region of the predicted class is an
intersection of half-spaces, so the minimum-norm perturbation that changes
the prediction is exactly the distance to the nearest pairwise hyperplane:

    dist(x; i, j) = |z_i(x) - z_j(x)| / ||W_i - W_j||

The boundary distance of a point is the minimum of these over all rivals of
its predicted class. The class-targeted variant keeps, for a target class
``c`` different from the prediction ``p``, the single (p, c) hyperplane
distance: a fast lower bound on the true distance to the region where ``c``
wins (the exact polytope distance costs a QP per point and lives only in
the test oracles).

Everything is computed in float64, blocked over rows, with hyperplane
norms cached lazily per observed predicted class.

Degenerate class pairs (identical weight rows) have no boundary: the
distance is ``+inf`` when the biases differ (never selectable) and ``0``
when the classes are fully indistinguishable (diagnosed once per call).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ShapeError
from .linear_head import LinearHead, logits

log = logging.getLogger(__name__)

DEFAULT_BLOCK = 65536


@dataclass
class BoundaryScores:
    """Boundary distances for a batch of points."""

    ddb: np.ndarray  # (n,)
    dcsdb: np.ndarray  # (n, C); column f(x_i) equals ddb[i]


class _NormTable:
    """Lazily built rows of the pairwise weight-difference norm matrix."""

    def __init__(self, head: LinearHead):
        self.W = head.W
        self.rows: dict[int, np.ndarray] = {}
        self.warned_indistinct = False

    def row(self, i: int) -> np.ndarray:
        cached = self.rows.get(i)
        if cached is None:
            cached = np.linalg.norm(self.W - self.W[i], axis=1)
            self.rows[i] = cached
        return cached

    def note_indistinct(self, i: int, j: int) -> None:
        if not self.warned_indistinct:
            log.warning(
                "classes %d and %d have identical weights and biases; "
                "their boundary distance is 0",
                i,
                j,
            )
            self.warned_indistinct = True


def pairwise_boundary_distance(head: LinearHead, x: np.ndarray, i: int, j: int) -> float:
    """Distance from ``x`` to the (i, j) decision hyperplane."""
    if i == j:
        raise ShapeError("pairwise distance needs two distinct classes")
    w = head.W[i] - head.W[j]
    norm = float(np.linalg.norm(w))
    num = abs(float(w @ np.asarray(x, dtype=np.float64)) + float(head.bias[i] - head.bias[j]))
    if norm == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / norm


def iter_pairwise_blocks(
    head: LinearHead,
    features: np.ndarray,
    row_indices: np.ndarray | None = None,
    block_size: int | None = None,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(start, predicted, dist)`` per row block.

    ``dist[r, j]`` is the distance from block row ``r`` to the hyperplane
    between its predicted class and ``j``; the predicted class's own column
    holds ``+inf`` so a row min gives the boundary distance directly.
    ``start`` is the offset of the block within ``row_indices`` (or within
    ``features`` when no indices are given). ``block_size`` defaults to the
    module constant, resolved at call time so tests can shrink it.
    """
    if block_size is None:
        block_size = DEFAULT_BLOCK
    table = _NormTable(head)
    n = len(features) if row_indices is None else len(row_indices)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        if row_indices is None:
            X = features[start:stop]
        else:
            X = features[row_indices[start:stop]]
        Z = logits(head, np.asarray(X, dtype=np.float64))
        p = np.argmax(Z, axis=1)
        num = Z[np.arange(len(Z)), p][:, None] - Z  # >= 0 by construction
        norms = np.empty_like(num)
        for c in np.unique(p):
            norms[p == c] = table.row(int(c))
        dist = np.full_like(num, np.inf)
        np.divide(num, norms, out=dist, where=norms > 0)
        degenerate = (norms == 0) & (num == 0)
        degenerate[np.arange(len(Z)), p] = False
        if degenerate.any():
            r, j = np.argwhere(degenerate)[0]
            table.note_indistinct(int(p[r]), int(j))
            dist[degenerate] = 0.0
        dist[np.arange(len(Z)), p] = np.inf
        yield start, p, dist


def ddb(head: LinearHead, X: np.ndarray, block_size: int | None = None) -> np.ndarray:
    """Minimum-norm perturbation (per row) that changes the prediction."""
    X = np.atleast_2d(np.asarray(X))
    out = np.empty(len(X))
    for start, _, dist in iter_pairwise_blocks(head, X, block_size=block_size):
        out[start : start + len(dist)] = dist.min(axis=1)
    return out


def dcsdb(
    head: LinearHead, X: np.ndarray, c: int, block_size: int | None = None
) -> np.ndarray:
    """Distance to the boundary of class ``c`` specifically.

    Rows already predicted as ``c`` score their plain boundary distance
    (the cheapest way out of the class); other rows score the pairwise
    lower bound on reaching it.
    """
    if not 0 <= c < head.num_classes:
        raise ShapeError(f"class {c} outside [0, {head.num_classes})")
    X = np.atleast_2d(np.asarray(X))
    out = np.empty(len(X))
    for start, p, dist in iter_pairwise_blocks(head, X, block_size=block_size):
        col = dist[:, c].copy()
        mine = p == c
        if mine.any():
            col[mine] = dist[mine].min(axis=1)
        out[start : start + len(dist)] = col
    return out


def boundary_scores(head: LinearHead, X: np.ndarray) -> BoundaryScores:
    """Materialize the full (n, C) distance matrix; intended for small pools."""
    X = np.atleast_2d(np.asarray(X))
    n, C = len(X), head.num_classes
    ddb_out = np.empty(n)
    mat = np.empty((n, C))
    for start, p, dist in iter_pairwise_blocks(head, X):
        stop = start + len(dist)
        row_min = dist.min(axis=1)
        ddb_out[start:stop] = row_min
        dist[np.arange(len(dist)), p] = row_min
        mat[start:stop] = dist
    return BoundaryScores(ddb=ddb_out, dcsdb=mat)
