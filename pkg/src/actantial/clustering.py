"""Ward-linkage agglomerative clustering, silhouette model selection and manual post-processing."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

_SIL_BLOCK = 1024


@dataclass(frozen=True)
class Merge:
    a: int  # cluster ids: 0..N-1 are points, N+s is the cluster created at step s
    b: int
    cost: float
    size: int


@dataclass
class Dendrogram:
    n: int
    merges: list[Merge]

    def as_linkage(self) -> np.ndarray:
        """SciPy-style linkage matrix (for plotting or comparison)."""
        return np.array([[m.a, m.b, m.cost, m.size] for m in self.merges], dtype=np.float64)


def ward_cluster(points) -> Dendrogram:
    """Agglomerate with the Lance-Williams Ward update on Euclidean distances.

    Merged clusters occupy the lower of the two slots; ties go to the smallest slot pair.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise ValueError("ward clustering needs at least 2 points")

    dist = cdist(x, x)
    np.fill_diagonal(dist, np.inf)
    size = np.ones(n)
    ident = np.arange(n)  # dendrogram id of the cluster held in each slot
    active = np.ones(n, dtype=bool)
    nearest = np.argmin(dist, axis=1)
    nearest_d = dist[np.arange(n), nearest]

    merges: list[Merge] = []
    for step in range(n - 1):
        i = int(np.argmin(nearest_d))
        j = int(nearest[i])
        i, j = min(i, j), max(i, j)
        dij = dist[i, j]
        ni, nj = size[i], size[j]
        merges.append(Merge(int(ident[i]), int(ident[j]), float(dij), int(ni + nj)))

        nk = size
        d_new = np.sqrt(
            np.maximum(
                ((ni + nk) * dist[i] ** 2 + (nj + nk) * dist[j] ** 2 - nk * dij**2)
                / (ni + nj + nk),
                0.0,
            )
        )
        active[j] = False
        d_new[~active] = np.inf
        d_new[i] = np.inf
        dist[i, :] = d_new
        dist[:, i] = d_new
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        size[i] = ni + nj
        ident[i] = n + step
        nearest_d[j] = np.inf

        if step == n - 2:
            break
        # rows that pointed at i or j must rescan; the rest can only improve towards i
        stale = active & ((nearest == i) | (nearest == j))
        stale[i] = True
        for r in np.flatnonzero(stale):
            nearest[r] = np.argmin(dist[r])
            nearest_d[r] = dist[r, nearest[r]]
        better = active & (d_new < nearest_d)
        better |= active & (d_new == nearest_d) & (i < nearest)
        better[i] = False
        nearest[better] = i
        nearest_d[better] = d_new[better]
    return Dendrogram(n, merges)


def relabel_by_size(groups: np.ndarray) -> np.ndarray:
    """Renumber group ids 0..k-1 by descending size, ties by smallest member index."""
    uniq, first, counts = np.unique(groups, return_index=True, return_counts=True)
    order = sorted(range(len(uniq)), key=lambda t: (-counts[t], first[t]))
    mapping = {uniq[t]: new for new, t in enumerate(order)}
    return np.array([mapping[g] for g in groups], dtype=np.int64)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    n = dendrogram.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    parent = list(range(2 * n - 1))

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for step, m in enumerate(dendrogram.merges[: n - k]):
        new = n + step
        parent[find(m.a)] = new
        parent[find(m.b)] = new
    roots = np.array([find(p) for p in range(n)])
    return relabel_by_size(roots)


def _check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two clusters")
    return np.searchsorted(uniq, labels)


def _silhouette_from_sums(sums: np.ndarray, idx: np.ndarray, counts: np.ndarray) -> np.ndarray:
    rows = np.arange(len(idx))
    own = counts[idx]
    a = np.where(own > 1, sums[rows, idx] / np.maximum(own - 1, 1), 0.0)
    other = sums / counts
    other[rows, idx] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.where(own > 1, s, 0.0)


def silhouette_samples(points, labels) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    idx = _check_labels(labels)
    k = idx.max() + 1
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    onehot = np.zeros((len(x), k))
    onehot[np.arange(len(x)), idx] = 1.0
    out = np.empty(len(x))
    for start in range(0, len(x), _SIL_BLOCK):
        stop = min(start + _SIL_BLOCK, len(x))
        sums = cdist(x[start:stop], x) @ onehot
        out[start:stop] = _silhouette_from_sums(sums, idx[start:stop], counts)
    return out


def silhouette(points, labels) -> float:
    """Mean silhouette; singleton clusters and points with a = b = 0 contribute 0."""
    return float(silhouette_samples(points, labels).mean())


@dataclass
class ClusterModel:
    k: int
    labels: np.ndarray  # -1 marks dropped articles
    silhouette: float | None
    scores: dict[int, float] = field(default_factory=dict)
    post_ops: list[dict] = field(default_factory=list)

    @property
    def kept(self) -> np.ndarray:
        return self.labels >= 0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "labels": self.labels.tolist(),
            "silhouette": self.silhouette,
            "scores": {str(k): v for k, v in self.scores.items()},
            "post_ops": self.post_ops,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClusterModel":
        return cls(
            k=data["k"],
            labels=np.asarray(data["labels"], dtype=np.int64),
            silhouette=data["silhouette"],
            scores={int(k): v for k, v in data.get("scores", {}).items()},
            post_ops=list(data.get("post_ops", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def select_k(points, k_min: int = 2, k_max: int = 40) -> tuple[int, ClusterModel]:
    """Cut the Ward dendrogram at every k in range and keep the best silhouette (ties: smaller k)."""
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    if k_min < 2 or k_max < k_min:
        raise ValueError(f"invalid k range [{k_min}, {k_max}]")
    if k_max >= n:
        raise ValueError(f"k_max={k_max} must be smaller than the number of points ({n})")
    dendrogram = ward_cluster(x)
    cuts = {k: cut(dendrogram, k) for k in range(k_min, k_max + 1)}
    scores = _silhouettes_for_cuts(x, cuts)
    best = max(scores, key=lambda k: (scores[k], -k))
    model = ClusterModel(best, cuts[best], scores[best], scores=scores)
    return best, model


def _silhouettes_for_cuts(x: np.ndarray, cuts: dict[int, np.ndarray]) -> dict[int, float]:
    # one pass over distance blocks serves every cut
    totals = {k: 0.0 for k in cuts}
    onehots = {}
    for k, labels in cuts.items():
        oh = np.zeros((len(x), k))
        oh[np.arange(len(x)), labels] = 1.0
        onehots[k] = (oh, oh.sum(axis=0))
    for start in range(0, len(x), _SIL_BLOCK):
        stop = min(start + _SIL_BLOCK, len(x))
        block = cdist(x[start:stop], x)
        for k, labels in cuts.items():
            oh, counts = onehots[k]
            totals[k] += _silhouette_from_sums(block @ oh, labels[start:stop], counts).sum()
    return {k: float(totals[k] / len(x)) for k in cuts}


def _recompute(model: ClusterModel, points) -> None:
    kept = model.kept
    if points is None or len(np.unique(model.labels[kept])) < 2:
        model.silhouette = None
        return
    model.silhouette = silhouette(np.asarray(points)[kept], model.labels[kept])


def drop_cluster(model: ClusterModel, cluster_id: int, points=None) -> ClusterModel:
    """Mark a cluster's articles as dropped (-1); higher ids shift down by one."""
    if not 0 <= cluster_id < model.k:
        raise ValueError(f"cluster id {cluster_id} out of range [0, {model.k})")
    out = copy.deepcopy(model)
    labels = out.labels
    labels[labels == cluster_id] = -1
    labels[labels > cluster_id] -= 1
    out.k -= 1
    out.post_ops.append({"op": "drop", "cluster": cluster_id})
    _recompute(out, points)
    return out


def merge_clusters(model: ClusterModel, id_a: int, id_b: int, points=None) -> ClusterModel:
    """Merge two clusters into the smaller id; ids above the larger one shift down by one."""
    for c in (id_a, id_b):
        if not 0 <= c < model.k:
            raise ValueError(f"cluster id {c} out of range [0, {model.k})")
    if id_a == id_b:
        raise ValueError("cannot merge a cluster with itself")
    lo, hi = sorted((id_a, id_b))
    out = copy.deepcopy(model)
    labels = out.labels
    labels[labels == hi] = lo
    labels[labels > hi] -= 1
    out.k -= 1
    out.post_ops.append({"op": "merge", "clusters": [lo, hi]})
    _recompute(out, points)
    return out
