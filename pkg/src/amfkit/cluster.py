"""Correlation-distance hierarchical clustering with minimax linkage.

The distance between two clusters is the minimax radius of their union:
the smallest over candidate centers of the farthest distance to any
member.  The center attaining it is the cluster's prototype, so every
cluster in the tree carries a single representative series.  Trees built
this way have no inversions, which makes threshold cuts well defined.

All ties (merge order and prototype choice) break toward the lowest leaf
index, so identical inputs always produce identical trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSeries,
    InsufficientOverlap,
    InvalidDistance,
)


def correlation_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - |Pearson correlation| over pairwise-complete observations."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError("series lengths differ")
    ok = np.isfinite(a) & np.isfinite(b)
    if ok.sum() < 3:
        raise InsufficientOverlap(f"common support has {int(ok.sum())} points, need >= 3")
    x = a[ok] - a[ok].mean()
    y = b[ok] - b[ok].mean()
    vx = float(x @ x)
    vy = float(y @ y)
    if vx <= 0.0 or vy <= 0.0:
        raise DegenerateSeries("zero variance over common support")
    corr = float(x @ y) / np.sqrt(vx * vy)
    return float(np.clip(1.0 - abs(corr), 0.0, 1.0))


def distance_matrix(series: np.ndarray) -> np.ndarray:
    """Pairwise correlation distances between columns of ``series``."""
    series = np.asarray(series, dtype=float)
    p = series.shape[1]
    d = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            d[i, j] = d[j, i] = correlation_distance(series[:, i], series[:, j])
    return d


@dataclass(frozen=True)
class Merge:
    left: int   # node id of one child
    right: int  # node id of the other child
    height: float
    prototype: int  # leaf index attaining the minimax radius
    members: tuple[int, ...]


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)


def _minimax(dist: np.ndarray, members: np.ndarray) -> tuple[float, int]:
    """Minimax radius of a member set and the prototype attaining it.

    ``members`` must be sorted ascending so argmin tie-breaks to the
    lowest leaf index.
    """
    sub = dist[np.ix_(members, members)]
    worst = sub.max(axis=1)
    k = int(np.argmin(worst))
    return float(worst[k]), int(members[k])


def _validate_distance(dist: np.ndarray) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidDistance("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise InvalidDistance("distance matrix must be finite")
    if np.any(np.abs(np.diag(d)) > 0):
        raise InvalidDistance("distance matrix diagonal must be zero")
    if np.any(d < 0) or np.any(d > 1):
        raise InvalidDistance("distances must lie in [0, 1]")
    if not np.array_equal(d, d.T):
        raise InvalidDistance("distance matrix must be symmetric")
    return d


def minimax_cluster(leaves: list[str] | tuple[str, ...], dist: np.ndarray) -> Dendrogram:
    """Agglomerate by repeatedly merging the pair minimizing the minimax
    radius of the union, recording each cluster's prototype."""
    d = _validate_distance(dist)
    n = d.shape[0]
    leaves = tuple(leaves)
    if len(leaves) != n:
        raise InvalidDistance("leaf labels must match matrix size")
    if n == 0:
        return Dendrogram(leaves=leaves, merges=())

    # cluster state: node id -> (sorted member leaf array)
    members: dict[int, np.ndarray] = {i: np.array([i]) for i in range(n)}
    min_leaf: dict[int, int] = {i: i for i in range(n)}
    active: list[int] = list(range(n))
    # cached candidate merges: (id_a, id_b) -> (height, prototype)
    cache: dict[tuple[int, int], tuple[float, int]] = {}

    def pair_key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if min_leaf[a] <= min_leaf[b] else (b, a)

    for a_pos in range(n):
        for b_pos in range(a_pos + 1, n):
            a, b = active[a_pos], active[b_pos]
            union = np.sort(np.concatenate([members[a], members[b]]))
            cache[pair_key(a, b)] = _minimax(d, union)

    merges: list[Merge] = []
    next_id = n
    while len(active) > 1:
        best = None
        for key, (height, proto) in cache.items():
            a, b = key
            rank = (height, min_leaf[a], min_leaf[b])
            if best is None or rank < best[0]:
                best = (rank, key, height, proto)
        _, (a, b), height, proto = best
        union = np.sort(np.concatenate([members[a], members[b]]))
        merges.append(Merge(left=a, right=b, height=height, prototype=proto,
                            members=tuple(int(i) for i in union)))
        for c in active:
            if c != a and c != b:
                cache.pop(pair_key(a, c), None)
                cache.pop(pair_key(b, c), None)
        cache.pop(pair_key(a, b))
        active.remove(a)
        active.remove(b)
        members.pop(a)
        members.pop(b)
        members[next_id] = union
        min_leaf[next_id] = int(union[0])
        for c in active:
            joint = np.sort(np.concatenate([members[c], union]))
            cache[pair_key(c, next_id)] = _minimax(d, joint)
        active.append(next_id)
        next_id += 1

    return Dendrogram(leaves=leaves, merges=tuple(merges))


@dataclass(frozen=True)
class PrototypeSet:
    """Representatives after cutting the tree at a distance threshold."""

    members: tuple[str, ...]
    threshold: float
    assignment: dict[str, str]

    def __len__(self) -> int:
        return len(self.members)


def cut_prototypes(dendrogram: Dendrogram, threshold: float) -> PrototypeSet:
    """Cut all merges above the threshold; one prototype per surviving
    cluster (a never-merged leaf is its own prototype)."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    n = dendrogram.n_leaves
    proto_of_node: dict[int, int] = {i: i for i in range(n)}
    alive: dict[int, tuple[int, ...]] = {i: (i,) for i in range(n)}
    next_id = n
    for merge in dendrogram.merges:
        if merge.height > threshold:
            break  # heights are monotone; nothing later can qualify
        alive.pop(merge.left)
        alive.pop(merge.right)
        alive[next_id] = merge.members
        proto_of_node[next_id] = merge.prototype
        next_id += 1

    leaves = dendrogram.leaves
    assignment: dict[str, str] = {}
    protos: list[int] = []
    for node in sorted(alive, key=lambda nid: alive[nid][0]):
        proto = proto_of_node[node]
        protos.append(proto)
        for leaf in alive[node]:
            assignment[leaves[leaf]] = leaves[proto]
    return PrototypeSet(
        members=tuple(leaves[i] for i in sorted(protos)),
        threshold=threshold,
        assignment=assignment,
    )
