"""Per-actant truncated SVD ("micro" reduction) and the concatenated narrative embedding."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embedder import cosine_matrix
from .extraction import ROLES, ActantRole

logger = logging.getLogger(__name__)

REDUCER_VERSION = "actantial-svd/1"
POOLED = "pooled"


@dataclass
class SvdReducer:
    """Projection onto the top-``d`` right singular vectors (columns of ``components``)."""

    components: np.ndarray  # D x d
    singular_values: np.ndarray  # d, non-increasing
    role: str = POOLED
    degenerate: bool = False
    center: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def D(self) -> int:
        return self.components.shape[0]

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if x.shape[1] != self.D:
            raise ValueError(f"expected vectors of dimension {self.D}, got {x.shape[1]}")
        if self.center is not None:
            x = x - self.center
        return x @ self.components

    def to_json(self) -> dict:
        return {
            "version": REDUCER_VERSION,
            "role": self.role,
            "d": self.d,
            "D": self.D,
            "degenerate": self.degenerate,
            "components": self.components.ravel(order="C").tolist(),
            "singular_values": self.singular_values.tolist(),
            "center": None if self.center is None else self.center.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SvdReducer":
        if data.get("version") != REDUCER_VERSION:
            raise ValueError(f"unsupported reducer version {data.get('version')!r}")
        comps = np.asarray(data["components"], dtype=np.float64).reshape(data["D"], data["d"])
        center = data.get("center")
        return cls(
            components=comps,
            singular_values=np.asarray(data["singular_values"], dtype=np.float64),
            role=data["role"],
            degenerate=data["degenerate"],
            center=None if center is None else np.asarray(center, dtype=np.float64),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SvdReducer":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each column so that its largest-magnitude entry (first on ties) is positive."""
    idx = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[idx, np.arange(components.shape[1])])
    signs[signs == 0] = 1.0
    return components * signs


def fit_svd(vectors, d: int = 34, role: str = POOLED) -> SvdReducer:
    """Top-``d`` right singular vectors of the uncentered ``N x D`` matrix."""
    a = np.asarray(vectors, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected an N x D matrix")
    n, dim = a.shape
    if d < 1:
        raise ValueError("target dimension must be >= 1")
    if n < d:
        raise ValueError(
            f"only {n} vectors for role {role!r}; choose a target dimension d <= {n}"
        )
    if dim < d:
        raise ValueError(f"target dimension {d} exceeds embedding dimension {dim}")
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    components = fix_signs(vt[:d].T.copy())
    values = s[:d].copy()
    tol = (s[0] if s.size else 0.0) * max(n, dim) * np.finfo(np.float64).eps
    rank = int(np.sum(s > tol))
    degenerate = rank < d
    if degenerate:
        values[rank:] = 0.0
        logger.info("reducer %s: rank %d < d=%d, padded with zero singular values", role, rank, d)
    return SvdReducer(components, values, role=role, degenerate=degenerate)


def fit_pca(vectors, d: int, role: str = POOLED) -> SvdReducer:
    """PCA: the same fit applied to mean-centered data; the mean is subtracted on transform."""
    a = np.asarray(vectors, dtype=np.float64)
    mean = a.mean(axis=0)
    reducer = fit_svd(a - mean, d, role)
    reducer.center = mean
    return reducer


def reduce(v, reducer: SvdReducer) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a single vector")
    return reducer.transform(v)[0]


@dataclass(frozen=True)
class NarrativeEmbedding:
    blocks: tuple[np.ndarray, ...]

    @property
    def concat(self) -> np.ndarray:
        return np.concatenate(self.blocks)


def build_narrative_embedding(
    actant_vectors: Mapping[ActantRole, np.ndarray | None],
    reducers: Mapping[ActantRole, SvdReducer],
) -> NarrativeEmbedding:
    missing = [r.value for r in ROLES if r not in reducers]
    if missing:
        raise ValueError(f"no reducer for role(s): {', '.join(missing)}")
    blocks = []
    for role in ROLES:
        red = reducers[role]
        vec = actant_vectors.get(role)
        blocks.append(np.zeros(red.d) if vec is None else reduce(vec, red))
    return NarrativeEmbedding(tuple(blocks))


def fit_reducers(
    role_vectors: Mapping[ActantRole, np.ndarray], d: int = 34, scope: str = "per-role"
) -> dict[ActantRole, SvdReducer]:
    """Fit one reducer per role on that role's vectors, or one pooled reducer shared by all."""
    if scope == "per-role":
        return {role: fit_svd(role_vectors[role], d, role=role.value) for role in ROLES}
    if scope == "pooled":
        pooled = np.vstack([role_vectors[r] for r in ROLES if len(role_vectors[r])])
        shared = fit_svd(pooled, d, role=POOLED)
        return {role: shared for role in ROLES}
    raise ValueError(f"unknown fit scope {scope!r}")


def narrative_matrix(
    rows: Sequence[Mapping[ActantRole, np.ndarray | None]],
    d: int = 34,
    scope: str = "per-role",
) -> tuple[np.ndarray, dict[ActantRole, SvdReducer]]:
    """Fit reducers on all present actant vectors and build the ``N x 6d`` embedding matrix."""
    role_vectors = {}
    for role in ROLES:
        present = [r[role] for r in rows if r.get(role) is not None]
        role_vectors[role] = np.asarray(present, dtype=np.float64).reshape(len(present), -1)
    reducers = fit_reducers(role_vectors, d, scope)
    matrix = np.empty((len(rows), 6 * d))
    for i, row in enumerate(rows):
        matrix[i] = build_narrative_embedding(row, reducers).concat
    return matrix, reducers


def average_subdiagonal_similarity(vectors) -> float:
    """Mean cosine similarity over all pairs i > j; zero-norm vectors contribute 0."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two vectors")
    sim = cosine_matrix(x)
    rows, cols = np.tril_indices(x.shape[0], k=-1)
    return float(sim[rows, cols].mean())


@dataclass
class DimStudyResult:
    # (method, dim) -> average similarity, or None when the reduction was infeasible
    values: dict[tuple[str, int], float | None]
    baseline: float

    def rows(self) -> list[tuple[str, int, float | None]]:
        return [(m, k, v) for (m, k), v in sorted(self.values.items())]


def dim_study(
    vectors,
    dims: Sequence[int],
    methods: Sequence[str] = ("svd", "pca", "umap"),
    umap_params=None,
) -> DimStudyResult:
    """Average pairwise similarity after reducing the full embedding to each target dimension."""
    from .projection import UmapParams, umap

    x = np.asarray(vectors, dtype=np.float64)
    n, dim = x.shape
    values: dict[tuple[str, int], float | None] = {}
    for method in methods:
        for k in dims:
            if k < 1 or k > dim:
                values[(method, k)] = None
                continue
            if method == "svd":
                if k > n:
                    values[(method, k)] = None
                    continue
                reduced = fit_svd(x, k).transform(x)
            elif method == "pca":
                if k > n:
                    values[(method, k)] = None
                    continue
                reduced = fit_pca(x, k).transform(x)
            elif method == "umap":
                base = umap_params or UmapParams()
                if k >= n - 1 or base.n_neighbors >= n:
                    values[(method, k)] = None
                    continue
                reduced = umap(x, base.replace(n_components=k))
            else:
                raise ValueError(f"unknown method {method!r}")
            values[(method, k)] = average_subdiagonal_similarity(reduced)
    return DimStudyResult(values, average_subdiagonal_similarity(x))
