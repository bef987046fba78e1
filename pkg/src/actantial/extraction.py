"""Actantial model extraction: prompt rendering, answer parsing and syncretism detection."""

from __future__ import annotations

import enum
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .cache import FileCache, content_key
from .chat import EndpointError
from .corpus import Corpus

logger = logging.getLogger(__name__)


class ActantRole(enum.Enum):
    SUBJECT = "Subject"
    OBJECT = "Object"
    SENDER = "Sender"
    RECEIVER = "Receiver"
    HELPER = "Helper"
    OPPONENT = "Opponent"

    @property
    def code(self) -> str:
        return self.value[:2]

    @classmethod
    def from_name(cls, name: str) -> "ActantRole":
        key = name.strip().casefold()
        for role in cls:
            if role.value.casefold() == key or role.code.casefold() == key:
                return role
        raise ValueError(f"unknown actant role {name!r}")


# Canonical order for block concatenation and label codes.
ROLES: tuple[ActantRole, ...] = tuple(ActantRole)
ROLE_PAIRS: tuple[tuple[ActantRole, ActantRole], ...] = tuple(combinations(ROLES, 2))


class RelationAxis(enum.Enum):
    DESIRE = "desire"
    COMMUNICATION = "communication"
    POWER = "power"


AXIS_ROLES: dict[RelationAxis, tuple[ActantRole, ...]] = {
    RelationAxis.DESIRE: (ActantRole.SUBJECT, ActantRole.OBJECT),
    RelationAxis.COMMUNICATION: (ActantRole.SENDER, ActantRole.OBJECT, ActantRole.RECEIVER),
    RelationAxis.POWER: (ActantRole.HELPER, ActantRole.OPPONENT, ActantRole.SUBJECT),
}

_WS = re.compile(r"\s+")


def normalize_actor(text: str) -> str:
    """Trim and collapse internal whitespace."""
    return _WS.sub(" ", text).strip()


def actor_key(text: str, case_sensitive: bool = False) -> str:
    """Comparison key for actor strings."""
    text = normalize_actor(text)
    return text if case_sensitive else text.casefold()


@dataclass(frozen=True)
class ActantialModel:
    actors: Mapping[ActantRole, tuple[str, ...]]

    def __post_init__(self) -> None:
        clean = {}
        for role in ROLES:
            values = (normalize_actor(a) for a in self.actors.get(role, ()))
            clean[role] = tuple(v for v in values if v)
        object.__setattr__(self, "actors", clean)

    def __hash__(self) -> int:
        return hash(tuple(self.actors[r] for r in ROLES))

    @classmethod
    def from_primaries(cls, **primaries: str | None) -> "ActantialModel":
        """Build from role-name keyword arguments, e.g. ``subject="Israel"``."""
        actors = {}
        for name, value in primaries.items():
            role = ActantRole.from_name(name)
            actors[role] = (value,) if value else ()
        return cls(actors)

    def primary(self, role: ActantRole) -> str | None:
        seq = self.actors[role]
        return seq[0] if seq else None

    @property
    def primaries(self) -> dict[ActantRole, str | None]:
        return {role: self.primary(role) for role in ROLES}

    def to_json(self) -> dict[str, list[str]]:
        return {role.value: list(self.actors[role]) for role in ROLES}

    @classmethod
    def from_json(cls, data: Mapping[str, Sequence[str]]) -> "ActantialModel":
        return cls({ActantRole(k): tuple(v) for k, v in data.items()})


PROMPT_TEMPLATE = """\
According to the Actantial Model by Greimas with the actant label set ["Sender", "Receiver", "Subject", "Object", "Helper", "Opponent"], the actants are defined as follows:

* Subject: The character who carries out the action and desires the Object.
* Object: The character or thing that is desired.
* Sender: The character who initiates the action and communicates the Object.
* Receiver: The character who receives the action or the Object.
* Helper: The character who assists the Subject in achieving its goal.
* Opponent: The character who opposes the Subject in achieving its goal.

Based on this Actantial Model and the actant label set, please recognize the actants in the given article.

Article: {{ article }}

Question: What are the main actants in the text? Provide the answer in the following JSON format: {"Actant Label": ["Actant Name"]}. If there is no corresponding actant, return the following empty list: {"Actant Label": []}.

Answer:"""

ARTICLE_SLOT = "{{ article }}"


def render_prompt(article_body: str) -> str:
    if not article_body or not article_body.strip():
        raise ValueError("article body is empty")
    head, tail = PROMPT_TEMPLATE.split(ARTICLE_SLOT)
    return head + article_body + tail


class ActantParseError(ValueError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


def _first_object(text: str) -> str | None:
    """Return the first balanced ``{...}`` region, honouring JSON string quoting."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        # unbalanced from this brace; try the next opening brace
        start = text.find("{", start + 1)
    return None


_FENCE = re.compile(r"```[A-Za-z]*")
_TRAILING_COMMA = re.compile(r",\s*([}\]])")


def _repair(text: str) -> str:
    return _TRAILING_COMMA.sub(r"\1", _FENCE.sub("", text))


def _as_actors(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    if isinstance(value, list):
        return tuple(v for v in value if isinstance(v, str))
    return ()


def parse_actants(raw: str) -> ActantialModel:
    """Parse a model answer into an :class:`ActantialModel`.

    Raises :class:`ActantParseError` (carrying ``raw``) when no JSON object can be
    recovered after a single repair pass.
    """
    if not isinstance(raw, str):
        raise ActantParseError("response is not a string", str(raw))
    data = None
    for candidate_text in (raw, _repair(raw)):
        region = _first_object(candidate_text)
        if region is None:
            continue
        for attempt in (region, _repair(region)):
            try:
                data = json.loads(attempt)
                break
            except (json.JSONDecodeError, RecursionError):
                continue
        if data is not None:
            break
    if data is None:
        raise ActantParseError("no parseable JSON object in response", raw)
    if not isinstance(data, dict):
        raise ActantParseError("JSON answer is not an object", raw)

    by_key: dict[str, object] = {}
    for key, value in data.items():
        by_key.setdefault(str(key).strip().casefold(), value)
    actors = {role: _as_actors(by_key.get(role.value.casefold())) for role in ROLES}
    return ActantialModel(actors)


def detect_syncretisms(
    model: ActantialModel, case_sensitive: bool = False
) -> set[tuple[ActantRole, ActantRole]]:
    """Role pairs (in canonical order) whose primary actors coincide."""
    keys = {
        role: actor_key(p, case_sensitive) for role, p in model.primaries.items() if p is not None
    }
    return {(a, b) for a, b in ROLE_PAIRS if a in keys and b in keys and keys[a] == keys[b]}


def pair_name(pair: tuple[ActantRole, ActantRole]) -> str:
    return f"{pair[0].value}-{pair[1].value}"


@dataclass
class ExtractionRecord:
    article_id: str
    raw_response: str
    status: str  # "ok" | "parse_error" | "endpoint_error"
    model: ActantialModel | None = None
    attempts: int = 0
    truncated: bool = False
    error: str | None = None
    cached: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if (self.status == "ok") != (self.model is not None):
            raise ValueError("status 'ok' requires a model and vice versa")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        return {
            "article_id": self.article_id,
            "status": self.status,
            "model": self.model.to_json() if self.model else None,
            "raw_response": self.raw_response,
            "attempts": self.attempts,
            "truncated": self.truncated,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExtractionRecord":
        model = ActantialModel.from_json(data["model"]) if data.get("model") else None
        return cls(
            article_id=data["article_id"],
            raw_response=data.get("raw_response", ""),
            status=data["status"],
            model=model,
            attempts=data.get("attempts", 0),
            truncated=data.get("truncated", False),
            error=data.get("error"),
        )


def truncate_body(body: str, max_chars: int | None) -> tuple[str, bool]:
    if max_chars is None or len(body) <= max_chars:
        return body, False
    return body[:max_chars], True


def _extract_one(article, client, cache: FileCache | None, max_body_chars, retries) -> ExtractionRecord:
    body, truncated = truncate_body(article.body, max_body_chars)
    prompt = render_prompt(body)
    key = content_key(prompt, client.model)
    raw = None
    cached = False
    attempts = 1  # a cached answer was produced by one successful request
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            raw = hit["response"]
            cached = True
    if raw is None:
        attempts = retries
        try:
            raw = client.complete(prompt, article_id=article.id)
        except EndpointError as exc:
            return ExtractionRecord(
                article.id, "", "endpoint_error", attempts=attempts, truncated=truncated, error=str(exc)
            )
        attempts = 1
        if cache is not None:
            cache.put(key, {"model": client.model, "article_id": article.id, "response": raw})
    try:
        model = parse_actants(raw)
    except ActantParseError as exc:
        return ExtractionRecord(
            article.id, raw, "parse_error", attempts=attempts, truncated=truncated,
            error=str(exc), cached=cached,
        )
    return ExtractionRecord(
        article.id, raw, "ok", model=model, attempts=attempts, truncated=truncated, cached=cached
    )


def extract_corpus(
    corpus: Corpus,
    client,
    cache: FileCache | None = None,
    *,
    max_body_chars: int | None = None,
    concurrency: int = 4,
    retries: int = 3,
) -> list[ExtractionRecord]:
    """Extract one record per article, in corpus order.

    ``client`` needs a ``model`` attribute and ``complete(prompt, article_id=...)``.
    Responses are cached under SHA-256(prompt, model id); cached entries are never re-requested.
    """
    articles = list(corpus)
    if concurrency <= 1:
        records = [_extract_one(a, client, cache, max_body_chars, retries) for a in articles]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(
                pool.map(lambda a: _extract_one(a, client, cache, max_body_chars, retries), articles)
            )
    failed = sum(not r.ok for r in records)
    if failed:
        logger.warning("%d of %d extractions failed", failed, len(records))
    return records


def write_records(records: Iterable[ExtractionRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path) -> list[ExtractionRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ExtractionRecord.from_json(json.loads(line)) for line in fh if line.strip()]
