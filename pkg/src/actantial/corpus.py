"""Loading, filtering and summarising a JSON-Lines news corpus."""

from __future__ import annotations

import datetime as dt
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("id", "source", "body")


class CorpusError(Exception):
    """Fatal problem with a corpus file (unreadable, wrong encoding)."""


@dataclass(frozen=True)
class LoadError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class Article:
    id: str
    source: str
    body: str
    title: str = ""
    url: str | None = None
    published_at: dt.date | None = None
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def word_count(self) -> int:
        return len(self.body.split())

    def to_json(self) -> dict:
        record = dict(self.extra)
        record.update(
            id=self.id,
            source=self.source,
            url=self.url,
            title=self.title,
            published_at=self.published_at.isoformat() if self.published_at else None,
            body=self.body,
            word_count=self.word_count,
        )
        return record


@dataclass
class Corpus:
    articles: list[Article]
    provenance: str = ""
    errors: list[LoadError] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for article in self.articles:
            if article.id in seen:
                raise ValueError(f"duplicate article id {article.id!r}")
            seen.add(article.id)
        self._index = {a.id: a for a in self.articles}

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self.articles)

    def __getitem__(self, article_id: str) -> Article:
        return self._index[article_id]

    def __contains__(self, article_id: object) -> bool:
        return article_id in self._index

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.articles]

    def subset(self, ids: Iterable[str]) -> "Corpus":
        keep = set(ids)
        return Corpus([a for a in self.articles if a.id in keep], self.provenance)


def parse_date(value: str) -> dt.date:
    """Parse an ISO-8601 date or datetime; datetimes with an offset are converted to UTC."""
    value = value.strip()
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        pass
    stamp = dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(dt.timezone.utc)
    return stamp.date()


def article_from_record(record: dict) -> Article:
    missing = [k for k in REQUIRED_KEYS if k not in record or record[k] is None]
    if missing:
        raise ValueError(f"missing required key(s): {', '.join(missing)}")
    for key in REQUIRED_KEYS:
        if not isinstance(record[key], str):
            raise ValueError(f"{key!r} must be a string")
    if not record["id"].strip():
        raise ValueError("empty id")
    if not record["body"].strip():
        raise ValueError("empty body")

    published = record.get("published_at")
    date = None
    if published:
        try:
            date = parse_date(str(published))
        except ValueError:
            raise ValueError(f"published_at {published!r} is not an ISO-8601 date") from None

    known = {"id", "source", "body", "title", "url", "published_at", "word_count"}
    return Article(
        id=record["id"],
        source=record["source"],
        body=record["body"],
        title=record.get("title") or "",
        url=record.get("url"),
        published_at=date,
        extra={k: v for k, v in record.items() if k not in known},
    )


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus. Bad records are skipped and collected in ``Corpus.errors``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc

    articles: list[Article] = []
    errors: list[LoadError] = []
    first_line: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(LoadError(lineno, f"invalid JSON ({exc.msg})"))
            continue
        if not isinstance(record, dict):
            errors.append(LoadError(lineno, "record is not a JSON object"))
            continue
        try:
            article = article_from_record(record)
        except ValueError as exc:
            errors.append(LoadError(lineno, str(exc)))
            continue
        if article.id in first_line:
            errors.append(
                LoadError(
                    lineno,
                    f"duplicate id {article.id!r} on lines {first_line[article.id]} and {lineno}",
                )
            )
            continue
        first_line[article.id] = lineno
        articles.append(article)

    for err in errors:
        logger.warning("%s: %s", path, err)
    return Corpus(articles, provenance=f"loaded from {path.name}", errors=errors)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for article in corpus:
            fh.write(json.dumps(article.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def filter_by_keywords(corpus: Corpus, keywords: Sequence[str]) -> Corpus:
    """Keep articles whose title or body contains any keyword (case-insensitive substring)."""
    if not keywords:
        raise ValueError("at least one keyword is required")
    if any(not isinstance(k, str) or not k.strip() for k in keywords):
        raise ValueError("keywords must be non-empty strings")
    needles = [k.casefold() for k in keywords]
    kept = []
    for article in corpus:
        haystack = f"{article.title}\n{article.body}".casefold()
        if any(n in haystack for n in needles):
            kept.append(article)
    provenance = f"{corpus.provenance}; keywords={list(keywords)}".lstrip("; ")
    return Corpus(kept, provenance)


def iso_week(date: dt.date) -> str:
    year, week, _ = date.isocalendar()
    return f"{year}-W{week:02d}"


def weekly_counts(corpus: Iterable[Article], group_by_source: bool = False) -> dict[tuple, int]:
    """Article counts keyed by ``(iso_week,)`` or ``(iso_week, source)``."""
    counts: Counter = Counter()
    for article in corpus:
        if article.published_at is None:
            raise ValueError(f"article {article.id!r} has no published_at date")
        week = iso_week(article.published_at)
        counts[(week, article.source) if group_by_source else (week,)] += 1
    return dict(sorted(counts.items()))


def source_word_counts(corpus: Corpus) -> dict[str, float]:
    """Mean word count per source."""
    totals: Counter = Counter()
    n: Counter = Counter()
    for article in corpus:
        totals[article.source] += article.word_count
        n[article.source] += 1
    return {s: totals[s] / n[s] for s in sorted(n)}
