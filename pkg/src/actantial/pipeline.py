"""Glue between stages: actant embedding lookup, narrative matrix, projection and clustering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .clustering import ClusterModel, select_k
from .embedder import embed_texts
from .extraction import ROLES, ActantialModel, ActantRole
from .narrative_embedding import SvdReducer, narrative_matrix
from .projection import UmapParams, umap


def unique_primaries(models: Sequence[ActantialModel]) -> list[str]:
    return sorted({p for m in models for p in m.primaries.values() if p is not None})


def embed_actants(models: Sequence[ActantialModel], embedder, cache=None) -> dict[str, np.ndarray]:
    texts = unique_primaries(models)
    if not texts:
        return {}
    return dict(zip(texts, embed_texts(texts, embedder, cache)))


def actant_rows(
    models: Sequence[ActantialModel], vectors: Mapping[str, np.ndarray]
) -> list[dict[ActantRole, np.ndarray | None]]:
    rows = []
    for m in models:
        row = {}
        for role in ROLES:
            p = m.primary(role)
            row[role] = None if p is None else vectors[p]
        rows.append(row)
    return rows


@dataclass
class NarrativeRun:
    matrix: np.ndarray
    reducers: dict[ActantRole, SvdReducer]
    coords: np.ndarray
    k: int
    model: ClusterModel


def run_narrative(
    models: Sequence[ActantialModel],
    embedder,
    d: int = 34,
    scope: str = "per-role",
    umap_params: UmapParams = UmapParams(),
    k_min: int = 2,
    k_max: int = 40,
    cache=None,
) -> NarrativeRun:
    """Actants -> embeddings -> reduced blocks -> 2D layout -> Ward clusters."""
    vectors = embed_actants(models, embedder, cache)
    matrix, reducers = narrative_matrix(actant_rows(models, vectors), d, scope)
    coords = umap(matrix, umap_params)
    k, model = select_k(coords, k_min, min(k_max, len(models) - 1))
    return NarrativeRun(matrix, reducers, coords, k, model)
