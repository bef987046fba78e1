"""UMAP projection with exact nearest neighbours and single-threaded, seeded layout optimisation."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

SPREAD = 1.0
NEGATIVE_SAMPLE_RATE = 5
SIGMA_ITERATIONS = 64
SIGMA_TOLERANCE = 1e-5
_KNN_BLOCK = 1024


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_components: int = 2
    n_epochs: int = 500
    seed: int = 0
    metric: str = "euclidean"

    def validate(self, n_points: int | None = None) -> list[str]:
        problems = []
        if self.n_neighbors < 2:
            problems.append("umap.n_neighbors must be >= 2")
        if n_points is not None and self.n_neighbors >= n_points:
            problems.append(f"umap.n_neighbors={self.n_neighbors} must be < N={n_points}")
        if not 0 <= self.min_dist < SPREAD:
            problems.append(f"umap.min_dist must be in [0, {SPREAD})")
        if self.n_components < 1:
            problems.append("umap.n_components must be >= 1")
        if self.n_epochs < 1:
            problems.append("umap.n_epochs must be >= 1")
        if self.metric not in ("euclidean", "cosine"):
            problems.append(f"umap.metric must be 'euclidean' or 'cosine', got {self.metric!r}")
        return problems

    def replace(self, **changes) -> "UmapParams":
        return dataclasses.replace(self, **changes)

    def describe(self) -> str:
        return (
            f"n_neighbors={self.n_neighbors} min_dist={self.min_dist} "
            f"n_components={self.n_components} n_epochs={self.n_epochs} "
            f"metric={self.metric} seed={self.seed} spread={SPREAD} "
            f"negative_sample_rate={NEGATIVE_SAMPLE_RATE}"
        )


def _distances(block: np.ndarray, points: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return cdist(block, points, "euclidean")
    if metric == "cosine":
        # 1 - cos via half squared distance of unit vectors; zero vectors sit at distance 1
        def unit(x):
            n = np.linalg.norm(x, axis=1, keepdims=True)
            return np.divide(x, n, out=np.zeros_like(x), where=n > 0), n[:, 0] > 0

        ub, nb = unit(block)
        up, npnt = unit(points)
        dist = cdist(ub, up, "sqeuclidean") / 2.0
        dist[~nb[:, None] ^ ~npnt[None, :]] = 1.0
        return dist
    raise ValueError(f"unknown metric {metric!r}")


def knn(points, k: int, metric: str = "euclidean") -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbours excluding self; ties go to the smaller index."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k={k} must satisfy 1 <= k < N={n}")
    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k))
    for start in range(0, n, _KNN_BLOCK):
        stop = min(start + _KNN_BLOCK, n)
        block = _distances(x[start:stop], x, metric)
        block[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(block, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        dists[start:stop] = np.take_along_axis(block, order, axis=1)
    return indices, dists


@dataclass
class FuzzyGraph:
    weights: sp.csr_matrix  # symmetric, zero diagonal, entries in (0, 1]
    directed: sp.csr_matrix
    sigmas: np.ndarray
    rhos: np.ndarray
    degenerate: np.ndarray  # rows whose neighbour distances were all equal

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def smooth_knn(dists: np.ndarray, target: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row rho (nearest distance) and sigma so that sum_j exp(-(d_ij - rho)/sigma) = target."""
    rho = dists[:, 0].copy()
    offsets = np.maximum(dists - rho[:, None], 0.0)
    n = dists.shape[0]
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    done = np.zeros(n, dtype=bool)
    for _ in range(SIGMA_ITERATIONS):
        psum = np.exp(-offsets / mid[:, None]).sum(axis=1)
        done |= np.abs(psum - target) < SIGMA_TOLERANCE
        active = ~done
        if not active.any():
            break
        over = active & (psum > target)
        under = active & ~over
        hi[over] = mid[over]
        mid[over] = (lo[over] + hi[over]) / 2.0
        lo[under] = mid[under]
        finite = under & np.isfinite(hi)
        mid[finite] = (lo[finite] + hi[finite]) / 2.0
        mid[under & ~np.isfinite(hi)] *= 2.0
    degenerate = np.all(offsets == 0.0, axis=1)
    mid[degenerate] = 1.0
    return rho, mid, degenerate


def fuzzy_graph(knn_indices: np.ndarray, knn_dists: np.ndarray) -> FuzzyGraph:
    n, k = knn_indices.shape
    rho, sigma, degenerate = smooth_knn(knn_dists, np.log2(k))
    if degenerate.any():
        logger.info("%d point(s) with all-equal neighbour distances; sigma set to 1", degenerate.sum())
    w = np.exp(-np.maximum(knn_dists - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n), k)
    a = sp.csr_matrix((w.ravel(), (rows, knn_indices.ravel())), shape=(n, n))
    a.eliminate_zeros()
    at = a.T.tocsr()
    sym = (a + at - a.multiply(at)).tocsr()
    sym.setdiag(0.0)
    sym.eliminate_zeros()
    sym.sort_indices()
    return FuzzyGraph(sym, a, sigma, rho, degenerate)


def find_ab_params(min_dist: float, spread: float = SPREAD) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a x^(2b)) to the offset exponential membership curve."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def spectral_init(graph: sp.csr_matrix, dim: int) -> np.ndarray | None:
    """Eigenvectors of the normalised Laplacian, or None when the graph is disconnected."""
    n = graph.shape[0]
    if n <= dim + 1:
        return None
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        return None
    deg = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d_half = sp.diags(inv_sqrt)
    lap = sp.identity(n) - d_half @ graph @ d_half
    if n <= 3000:
        _, vecs = np.linalg.eigh(lap.toarray())
        coords = vecs[:, 1 : dim + 1]
    else:
        from scipy.sparse.linalg import eigsh

        try:
            vals, vecs = eigsh(lap, k=dim + 1, which="SM", v0=np.ones(n), tol=1e-4, maxiter=n * 5)
        except Exception as exc:  # ARPACK non-convergence
            logger.warning("spectral initialisation failed (%s); using random init", exc)
            return None
        order = np.argsort(vals)[1 : dim + 1]
        coords = vecs[:, order]
    return _fix_signs(coords)


@numba.njit(cache=True)
def _next_random(state):
    # xorshift64*
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return (x * np.uint64(2685821657736338717)) >> np.uint64(33)


@numba.njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@numba.njit(cache=True)
def _sgd(emb, head, tail, epochs_per_sample, a, b, n_epochs, neg_rate, state):
    n_vertices = emb.shape[0]
    dim = emb.shape[1]
    n_edges = head.shape[0]
    per_negative = epochs_per_sample / neg_rate
    next_negative = per_negative.copy()
    next_sample = epochs_per_sample.copy()
    for n in range(n_epochs):
        alpha = 1.0 - n / n_epochs
        for i in range(n_edges):
            if next_sample[i] > n:
                continue
            j = head[i]
            k = tail[i]
            d2 = 0.0
            for c in range(dim):
                diff = emb[j, c] - emb[k, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for c in range(dim):
                g = _clip(coeff * (emb[j, c] - emb[k, c]))
                emb[j, c] += g * alpha
                emb[k, c] -= g * alpha
            next_sample[i] += epochs_per_sample[i]

            n_neg = int((n - next_negative[i]) / per_negative[i])
            for _ in range(n_neg):
                k = np.int64(_next_random(state) % np.uint64(n_vertices))
                if k == j:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = emb[j, c] - emb[k, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = 2.0 * b / ((0.001 + d2) * (a * d2**b + 1.0))
                else:
                    coeff = 0.0
                for c in range(dim):
                    if coeff > 0.0:
                        g = _clip(coeff * (emb[j, c] - emb[k, c]))
                    else:
                        g = 4.0
                    emb[j, c] += g * alpha
            next_negative[i] += n_neg * per_negative[i]
    return emb


def initial_layout(graph: FuzzyGraph, params: UmapParams, rng: np.random.Generator) -> np.ndarray:
    n, dim = graph.n, params.n_components
    coords = spectral_init(graph.weights, dim)
    if coords is None:
        coords = rng.uniform(-10.0, 10.0, size=(n, dim))
    else:
        coords = coords * (10.0 / np.abs(coords).max())
        coords = coords + rng.normal(scale=1e-4, size=coords.shape)
    span = coords.max(axis=0) - coords.min(axis=0)
    span[span == 0] = 1.0
    return 10.0 * (coords - coords.min(axis=0)) / span


def optimize_layout(graph: FuzzyGraph, params: UmapParams) -> np.ndarray:
    w = graph.weights.tocoo()
    if w.nnz == 0:
        raise ValueError("fuzzy graph has no edges")
    rng = np.random.default_rng(params.seed)
    emb = initial_layout(graph, params, rng)

    keep = w.data >= w.data.max() / params.n_epochs
    head = w.row[keep].astype(np.int64)
    tail = w.col[keep].astype(np.int64)
    weights = w.data[keep]
    epochs_per_sample = weights.max() / weights  # sampled n_epochs * w / w_max times in total
    a, b = find_ab_params(params.min_dist)
    state = np.array([rng.integers(1, 2**63, dtype=np.uint64)], dtype=np.uint64)
    return _sgd(
        np.ascontiguousarray(emb), head, tail, epochs_per_sample, a, b,
        params.n_epochs, float(NEGATIVE_SAMPLE_RATE), state,
    )


def umap(points, params: UmapParams = UmapParams()) -> np.ndarray:
    """Project ``points`` (N x M) to ``params.n_components`` dimensions."""
    x = np.asarray(points, dtype=np.float64)
    problems = params.validate(len(x))
    if problems:
        raise ValueError("; ".join(problems))
    if np.all(x == x[0]):
        logger.warning("all input points coincide; returning a collapsed layout")
        return np.zeros((len(x), params.n_components))
    idx, dists = knn(x, params.n_neighbors, params.metric)
    graph = fuzzy_graph(idx, dists)
    return optimize_layout(graph, params)
