"""Report tables: cluster labels, actor frequencies, syncretisms, sources, timelines, baseline."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from sklearn.metrics import adjusted_rand_score

from .corpus import Corpus, iso_week
from .extraction import ROLE_PAIRS, ROLES, ActantialModel, ActantRole, actor_key, detect_syncretisms

logger = logging.getLogger(__name__)

# float slack so that e.g. exactly 20% passes a 0.20 threshold
_EPS = 1e-9


def _clusters(assignment: Mapping[str, int]) -> dict[int, list[str]]:
    groups: dict[int, list[str]] = defaultdict(list)
    for article_id, cluster in assignment.items():
        if cluster >= 0:
            groups[cluster].append(article_id)
    return dict(sorted(groups.items()))


class _ActorCounter:
    """Counts actors by normalised key while remembering raw surface forms."""

    def __init__(self) -> None:
        self.counts: Counter = Counter()
        self.surfaces: dict[str, Counter] = defaultdict(Counter)

    def add(self, actor: str) -> None:
        key = actor_key(actor)
        self.counts[key] += 1
        self.surfaces[key][actor] += 1

    def surface(self, key: str) -> str:
        forms = self.surfaces[key]
        return min(forms, key=lambda s: (-forms[s], s))

    def ranked(self) -> list[tuple[str, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class LabelEntry:
    actor: str
    roles: tuple[ActantRole, ...]
    shares: tuple[float, ...]

    @property
    def codes(self) -> str:
        return "".join(r.code for r in self.roles)

    def __str__(self) -> str:
        return f"{self.actor} ({self.codes})"


@dataclass
class ClusterLabelSpec:
    cluster_id: int
    entries: list[LabelEntry]
    size: int
    label_threshold: float = 0.20

    @property
    def label(self) -> str:
        return ", ".join(str(e) for e in self.entries)


def label_clusters(
    models: Mapping[str, ActantialModel],
    assignment: Mapping[str, int],
    threshold: float = 0.20,
) -> list[ClusterLabelSpec]:
    """Label each cluster with its modal primary actor per role (share >= threshold).

    Roles that share the same modal actor are grouped into one entry, e.g. ``Israel (SuSe)``.
    """
    specs = []
    for cluster, ids in _clusters(assignment).items():
        n = len(ids)
        modal: dict[ActantRole, tuple[str, float]] = {}
        surfaces = _ActorCounter()
        for role in ROLES:
            counter = _ActorCounter()
            for aid in ids:
                actor = models[aid].primary(role)
                if actor is not None:
                    counter.add(actor)
                    surfaces.add(actor)
            ranked = counter.ranked()
            if ranked and ranked[0][1] >= threshold * n - _EPS:
                modal[role] = (ranked[0][0], ranked[0][1] / n)
        entries: list[LabelEntry] = []
        by_key: dict[str, LabelEntry] = {}
        for role in ROLES:
            if role not in modal:
                continue
            key, share = modal[role]
            if key in by_key:
                e = by_key[key]
                e.roles += (role,)
                e.shares += (share,)
            else:
                e = LabelEntry(key, (role,), (share,))
                by_key[key] = e
                entries.append(e)
        for e in entries:
            # display the most frequent raw form among the grouped roles' occurrences
            forms: Counter = Counter()
            for aid in ids:
                for role in e.roles:
                    actor = models[aid].primary(role)
                    if actor is not None and actor_key(actor) == e.actor:
                        forms[actor] += 1
            e.actor = min(forms, key=lambda s: (-forms[s], s))
        specs.append(ClusterLabelSpec(cluster, entries, n, threshold))
    return specs


@dataclass
class ActorRow:
    cluster: int
    role: ActantRole
    actor: str
    share: float
    count: int


def actor_table(
    models: Mapping[str, ActantialModel],
    assignment: Mapping[str, int],
    min_share: float = 0.05,
    top: int = 3,
) -> list[ActorRow]:
    """Top actors per cluster and role; shares are relative to all articles in the cluster."""
    rows = []
    for cluster, ids in _clusters(assignment).items():
        n = len(ids)
        for role in ROLES:
            counter = _ActorCounter()
            for aid in ids:
                actor = models[aid].primary(role)
                if actor is not None:
                    counter.add(actor)
            kept = [(k, c) for k, c in counter.ranked() if c >= min_share * n - _EPS][:top]
            rows.extend(ActorRow(cluster, role, counter.surface(k), c / n, c) for k, c in kept)
    return rows


@dataclass
class SyncretismRow:
    pair: tuple[ActantRole, ActantRole]
    share: float
    count: int
    top_actors: list[tuple[str, float]]

    @property
    def name(self) -> str:
        return f"{self.pair[0].value}-{self.pair[1].value}"


def syncretism_report(
    models: Sequence[ActantialModel], case_sensitive: bool = False, top: int = 5
) -> list[SyncretismRow]:
    """Share of articles exhibiting each of the 15 role-pair syncretisms, sorted by share."""
    n = len(models)
    counts: Counter = Counter()
    actors: dict[tuple, _ActorCounter] = defaultdict(_ActorCounter)
    for model in models:
        for pair in detect_syncretisms(model, case_sensitive=case_sensitive):
            counts[pair] += 1
            actors[pair].add(model.primary(pair[0]))
    rows = []
    for pair in ROLE_PAIRS:
        c = counts[pair]
        tops = []
        if c:
            ac = actors[pair]
            tops = [(ac.surface(k), v / c) for k, v in ac.ranked()[:top]]
        rows.append(SyncretismRow(pair, c / n if n else 0.0, c, tops))
    order = {p: i for i, p in enumerate(ROLE_PAIRS)}
    rows.sort(key=lambda r: (-r.count, order[r.pair]))
    return rows


@dataclass
class MissingStats:
    overall: dict[ActantRole, float]
    per_cluster: dict[int, dict[ActantRole, float]]


def _missing_shares(models: Sequence[ActantialModel]) -> dict[ActantRole, float]:
    n = len(models)
    return {r: (sum(m.primary(r) is None for m in models) / n if n else 0.0) for r in ROLES}


def missing_actant_stats(
    models: Mapping[str, ActantialModel], assignment: Mapping[str, int] | None = None
) -> MissingStats:
    overall = _missing_shares(list(models.values()))
    per_cluster = {}
    if assignment is not None:
        for cluster, ids in _clusters(assignment).items():
            per_cluster[cluster] = _missing_shares([models[a] for a in ids])
    return MissingStats(overall, per_cluster)


def source_shares(assignment: Mapping[str, int], corpus: Corpus) -> dict[int, dict[str, float]]:
    sources = sorted({a.source for a in corpus})
    table = {}
    for cluster, ids in _clusters(assignment).items():
        counts = Counter(corpus[a].source for a in ids)
        table[cluster] = {s: counts[s] / len(ids) for s in sources}
    return table


def component_timeline(
    assignment: Mapping[str, int],
    corpus: Corpus,
    components: Mapping[str, Sequence[int]],
    group_by_source: bool = True,
) -> dict[str, dict[tuple, int]]:
    """Weekly article counts per named component (a set of cluster ids).

    Every component gets the same set of week (and source) keys, zero-filled, covering all
    assigned articles.
    """
    owner: dict[int, str] = {}
    for name, clusters in components.items():
        for c in clusters:
            if c in owner:
                raise ValueError(f"cluster {c} is in both {owner[c]!r} and {name!r}")
            owner[c] = name

    def key(article) -> tuple:
        if article.published_at is None:
            raise ValueError(f"article {article.id!r} has no published_at date")
        week = iso_week(article.published_at)
        return (week, article.source) if group_by_source else (week,)

    assigned = [corpus[a] for a, c in assignment.items() if c >= 0]
    all_keys = sorted({key(a) for a in assigned})
    series = {name: dict.fromkeys(all_keys, 0) for name in components}
    for a in assigned:
        name = owner.get(assignment[a.id])
        if name is not None:
            series[name][key(a)] += 1
    return series


@dataclass
class BaselineComparison:
    clusters: tuple[int, ...]
    n_articles: int
    ari: float


@dataclass
class BaselineResult:
    k: int
    labels: np.ndarray
    silhouette: float | None
    coords: np.ndarray
    comparisons: list[BaselineComparison]


def compare_partitions(
    narrative_labels: np.ndarray, baseline_labels: np.ndarray, clusters: Sequence[int]
) -> BaselineComparison:
    """ARI between the two labelings on articles the narrative pipeline put in ``clusters``."""
    mask = np.isin(narrative_labels, list(clusters))
    ari = float(adjusted_rand_score(narrative_labels[mask], baseline_labels[mask])) if mask.any() else 0.0
    return BaselineComparison(tuple(clusters), int(mask.sum()), ari)


def baseline_whole_text(
    corpus: Corpus,
    embedder,
    umap_params,
    k_min: int = 2,
    k_max: int = 40,
    narrative_labels: np.ndarray | None = None,
    cluster_pairs: Sequence[Sequence[int]] = (),
    cache=None,
) -> BaselineResult:
    """Cluster whole-article embeddings with the same UMAP + Ward + silhouette pipeline."""
    from .clustering import select_k
    from .embedder import embed_texts
    from .projection import umap

    vectors = embed_texts([a.body for a in corpus], embedder, cache)
    coords = umap(vectors, umap_params)
    k_max = min(k_max, len(corpus) - 1)
    k, model = select_k(coords, k_min, k_max)
    comparisons = []
    if narrative_labels is not None:
        comparisons = [compare_partitions(narrative_labels, model.labels, p) for p in cluster_pairs]
    return BaselineResult(k, model.labels, model.silhouette, coords, comparisons)
