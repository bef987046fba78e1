"""Synthetic corpora and canned LLM answers for offline runs and tests."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Article, Corpus
from .extraction import ROLES, ActantialModel, ActantRole

# Weighted actor pools per role, loosely shaped like coverage of the Israel-Gaza war.
ACTOR_POOLS: dict[ActantRole, dict[str, float]] = {
    ActantRole.SUBJECT: {
        "Israel": 12, "Benjamin Netanyahu": 3, "Joe Biden": 3, "President Biden": 3, "Hamas": 3,
        "Palestinians": 2, "Antony Blinken": 2, "Donald Trump": 2, "The author": 1, "Iran": 1,
        "Ukraine": 1, "House Republicans": 1, "Qatar": 1, "Houthis": 1,
    },
    ActantRole.OBJECT: {
        "Gaza": 8, "Israel": 6, "Gaza Strip": 4, "Ukraine": 2, "aid": 2, "Hamas": 2,
        "Palestinians": 2, "ceasefire": 2, "hostages": 2, "judicial overhaul": 1, "Rafah": 1,
    },
    ActantRole.SENDER: {
        "Israel": 8, "President Biden": 4, "Hamas": 4, "Israeli forces": 3, "Benjamin Netanyahu": 2,
        "United States": 2, "Israel Defense Forces": 2, "Iran": 1, "Donald Trump": 1, "Qatar": 1,
    },
    ActantRole.RECEIVER: {
        "Israel": 10, "Palestinians": 4, "Gaza": 4, "Hamas": 3, "Gaza Strip": 2, "Congress": 1,
        "Ukraine": 1, "Israelis": 1, "Iran": 1, "the reader": 1,
    },
    ActantRole.HELPER: {
        "United States": 4, "Qatar": 3, "Egypt": 3, "U.S. officials": 2, "United Nations": 2,
        "UNRWA": 1, "European Union": 1, "Jordan": 1, "Red Cross": 1,
    },
    ActantRole.OPPONENT: {
        "Hamas": 10, "Israel": 9, "Israeli forces": 3, "Russia": 2, "Iran": 2, "Hezbollah": 2,
        "Palestinian militants": 1, "Donald Trump": 1, "Houthis": 1, "Israeli army": 1,
    },
}

SOURCES = ("aljazeera", "washingtonpost")

_FILLER = (
    "Officials did not immediately respond to requests for comment.",
    "The situation on the ground remained fluid throughout the day.",
    "Humanitarian groups warned of worsening conditions for civilians.",
    "Analysts said the developments could reshape the region for years.",
    "Diplomats met late into the night to discuss the next steps.",
    "Residents described long queues for bread, water and fuel.",
    "The statement was issued after an emergency cabinet meeting.",
    "Several foreign governments called for restraint on all sides.",
)


def sample_actor(role: ActantRole, rng: np.random.Generator) -> str:
    pool = ACTOR_POOLS[role]
    names = list(pool)
    p = np.array([pool[n] for n in names], dtype=float)
    return names[rng.choice(len(names), p=p / p.sum())]


def realistic_actants(n: int, seed: int = 0) -> list[str]:
    """A non-unique sample of actant strings pooled over all roles."""
    rng = np.random.default_rng(seed)
    roles = rng.integers(0, len(ROLES), size=n)
    return [sample_actor(ROLES[r], rng) for r in roles]


def sample_model(rng: np.random.Generator, missing: tuple[ActantRole, ...] = ()) -> ActantialModel:
    return ActantialModel(
        {role: () if role in missing else (sample_actor(role, rng),) for role in ROLES}
    )


def article_body(model: ActantialModel, rng: np.random.Generator, n_filler: int = 3) -> str:
    p = model.primaries
    parts = []
    if p[ActantRole.SUBJECT]:
        obj = p[ActantRole.OBJECT] or "its aims"
        parts.append(f"{p[ActantRole.SUBJECT]} pressed ahead with its plans concerning {obj}.")
    if p[ActantRole.SENDER]:
        rec = p[ActantRole.RECEIVER] or "the public"
        parts.append(f"{p[ActantRole.SENDER]} announced the decision to {rec} on Tuesday.")
    if p[ActantRole.HELPER]:
        parts.append(f"{p[ActantRole.HELPER]} offered support.")
    if p[ActantRole.OPPONENT]:
        parts.append(f"{p[ActantRole.OPPONENT]} vowed to resist.")
    picks = rng.choice(len(_FILLER), size=n_filler, replace=False)
    parts.extend(_FILLER[i] for i in picks)
    parts.append("The war in Gaza entered another week.")
    return " ".join(parts)


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    models: dict[str, ActantialModel]
    truth: np.ndarray


def _date(rng: np.random.Generator, start=dt.date(2023, 10, 2), days: int = 70) -> dt.date:
    return start + dt.timedelta(days=int(rng.integers(0, days)))


def role_swap_corpus(n_pairs: int = 20, seed: int = 0) -> SyntheticCorpus:
    """Pairs of articles with the same body and actor set; group 1 swaps Subject/Object and
    Sender/Receiver relative to group 0."""
    rng = np.random.default_rng(seed)
    helpers = ("Egypt", "Qatar", "United Nations")
    opponents = ("Iran", "Hezbollah", "Russia")
    articles, models, truth = [], {}, []
    for p in range(n_pairs):
        he = helpers[rng.integers(len(helpers))]
        op = opponents[rng.integers(len(opponents))]
        base = dict(subject="Israel", object="Hamas", sender="United States",
                    receiver="Palestinians", helper=he, opponent=op)
        swapped = dict(base, subject="Hamas", object="Israel",
                       sender="Palestinians", receiver="United States")
        body = (
            f"Israel, Hamas, the United States and Palestinians were at the centre of events. "
            f"{he} and {op} also played a part. " + " ".join(
                _FILLER[i] for i in rng.choice(len(_FILLER), size=3, replace=False)
            ) + f" Report number {p}."
        )
        date = _date(rng)
        for group, roles in ((0, base), (1, swapped)):
            aid = f"swap-{p:02d}-{group}"
            articles.append(Article(aid, SOURCES[group], body, title=f"Pair {p}", published_at=date))
            models[aid] = ActantialModel.from_primaries(**roles)
            truth.append(group)
    return SyntheticCorpus(Corpus(articles, "role-swap synthetic"), models, np.array(truth))


def missing_actant_corpus(n: int = 100, missing_share: float = 0.2, seed: int = 0) -> SyntheticCorpus:
    """Articles drawn from the actor pools; a fixed share has neither Helper nor Opponent."""
    rng = np.random.default_rng(seed)
    n_missing = int(round(n * missing_share))
    flags = np.zeros(n, dtype=int)
    flags[rng.choice(n, size=n_missing, replace=False)] = 1
    articles, models = [], {}
    for i, flag in enumerate(flags):
        missing = (ActantRole.HELPER, ActantRole.OPPONENT) if flag else ()
        model = sample_model(rng, missing)
        aid = f"art-{i:03d}"
        models[aid] = model
        articles.append(
            Article(aid, SOURCES[i % 2], article_body(model, rng), published_at=_date(rng))
        )
    return SyntheticCorpus(Corpus(articles, "missing-actant synthetic"), models, flags)


def _render_answer(model: ActantialModel, style: int) -> str:
    data = model.to_json()
    if style == 0:
        return json.dumps(data)
    if style == 1:
        return "```json\n" + json.dumps(data, indent=2) + "\n```"
    if style == 2:
        # single actors as bare strings, with a trailing comma
        items = [f'"{k}": ' + (json.dumps(v[0]) if len(v) == 1 else json.dumps(v)) for k, v in data.items()]
        return "{" + ", ".join(items) + ",}"
    return "Here are the actants in the text:\n" + json.dumps(data, indent=1) + "\nLet me know if you need more."


def fixture_corpus(seed: int = 7) -> tuple[list[dict], list[dict]]:
    """The bundled 60-line offline fixture: corpus records and canned chat answers.

    Three lines are off-topic (dropped by the keyword filter) and one answer is malformed.
    """
    rng = np.random.default_rng(seed)
    records, answers = [], []
    for i in range(60):
        aid = f"fx-{i:03d}"
        source = SOURCES[int(rng.integers(2))]
        date = _date(rng, start=dt.date(2023, 9, 25), days=84)
        if i in (13, 29, 47):
            body = "The local football club won its third match in a row. " + " ".join(
                _FILLER[j] for j in rng.choice(len(_FILLER), size=2, replace=False)
            )
            records.append(dict(id=aid, source=source, title="Sports roundup", body=body,
                                published_at=date.isoformat(), url=f"https://example.org/{aid}"))
            continue
        missing = (ActantRole.HELPER, ActantRole.OPPONENT) if rng.random() < 0.15 else ()
        if not missing and rng.random() < 0.15:
            missing = (ActantRole.HELPER,)
        model = sample_model(rng, missing)
        if rng.random() < 0.3:
            extra = sample_actor(ActantRole.OPPONENT, rng)
            actors = dict(model.actors)
            actors[ActantRole.OPPONENT] = actors[ActantRole.OPPONENT] + (extra,)
            model = ActantialModel(actors)
        body = article_body(model, rng, n_filler=int(rng.integers(2, 6)))
        records.append(dict(id=aid, source=source, title=f"Report {i}", body=body,
                            published_at=date.isoformat(), url=f"https://example.org/{aid}"))
        answer = "I am unable to identify the actants." if i == 21 else _render_answer(model, i % 4)
        answers.append(dict(id=aid, response=answer))
    return records, answers


FIXTURE_CONFIG = """\
corpus = "corpus.jsonl"
keywords = ["Israel", "Palestine", "Gaza", "Hamas"]
seed = 0
svd_dim = 16
fit_scope = "per-role"
k_min = 2
k_max = 12
label_threshold = 0.20
table_threshold = 0.05

[chat]
mode = "stub"
stub_path = "responses.jsonl"
model = "stub-llama"

[embedder]
mode = "hash"
dimension = 256

[umap]
n_neighbors = 10
n_epochs = 300

[components]
"Hamas as Opponent" = [0, 1]
"Israel as Opponent" = [2, 3]

[baseline]
cluster_pairs = [[0, 1]]
"""


def write_fixture(directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records, answers = fixture_corpus()
    with open(directory / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(directory / "responses.jsonl", "w", encoding="utf-8") as fh:
        for ans in answers:
            fh.write(json.dumps(ans, sort_keys=True) + "\n")
    (directory / "config.toml").write_text(FIXTURE_CONFIG, encoding="utf-8")
    return directory


def gaussian_blobs(
    n_blobs: int, per_blob: int, dim: int, seed: int = 0, spread: float = 10.0
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(n_blobs, dim))
    labels = np.repeat(np.arange(n_blobs), per_blob)
    points = centers[labels] + rng.normal(size=(len(labels), dim))
    return points, labels
