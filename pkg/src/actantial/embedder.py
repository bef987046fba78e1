"""Text embeddings for actant strings and article bodies.

Two backends share one interface (``model_id``, ``prefix``, ``dimension`` and
``embed_batch``): an OpenAI-compatible HTTP endpoint, and a deterministic hash
embedder that lets the whole pipeline run offline.
"""

from __future__ import annotations

import hashlib
import logging
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .cache import FileCache, content_key
from .chat import EndpointError, post_with_retries

logger = logging.getLogger(__name__)

VECTOR_STORE_VERSION = "actantial-vectors/1"


class EmbeddingDimensionError(Exception):
    """The endpoint returned vectors of a different size than configured."""


class EmbeddingTransportError(Exception):
    def __init__(self, message: str, failed: Sequence[str]):
        super().__init__(message)
        self.failed = list(failed)


class ZeroNormWarning(UserWarning):
    pass


@dataclass
class EmbedderConfig:
    base_url: str = "http://localhost:8001/v1"
    model: str = "intfloat/e5-large"
    dimension: int = 1024
    prefix: str = ""
    batch_size: int = 32
    mode: str = "http"  # "http" or "hash"
    seed: int = 0
    anisotropy: float = 0.0  # hash mode only
    api_key_env: str = "ACTANTIAL_EMBED_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0

    def validate(self) -> list[str]:
        problems = []
        if self.dimension <= 0:
            problems.append("embedder.dimension must be > 0")
        if self.batch_size < 1:
            problems.append("embedder.batch_size must be >= 1")
        if self.mode not in ("http", "hash"):
            problems.append(f"embedder.mode must be 'http' or 'hash', got {self.mode!r}")
        if not 0.0 <= self.anisotropy < 1.0:
            problems.append("embedder.anisotropy must be in [0, 1)")
        return problems


def test_embedder(text: str, dimension: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vector drawn from a PRNG seeded by SHA-256(seed, text).

    Gaussian draws make the output isotropic: unrelated strings are nearly orthogonal.
    """
    if dimension <= 0:
        raise ValueError("dimension must be positive")
    digest = hashlib.sha256(f"{seed}\x00{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    v = rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


test_embedder.__test__ = False  # not a pytest test despite the name


class HashEmbedder:
    """Offline embedder built on :func:`test_embedder`.

    ``anisotropy`` mixes in a shared direction so that unrelated strings have cosine
    similarity close to that value, as sentence-transformer embeddings typically do.
    At 0 the output is exactly ``test_embedder``.
    """

    def __init__(self, dimension: int = 1024, seed: int = 0, prefix: str = "", anisotropy: float = 0.0):
        if not 0.0 <= anisotropy < 1.0:
            raise ValueError("anisotropy must be in [0, 1)")
        self.dimension = dimension
        self.seed = seed
        self.prefix = prefix
        self.anisotropy = anisotropy
        self.model_id = f"hash-{dimension}-{seed}" + (f"-a{anisotropy:g}" if anisotropy else "")
        self._common = test_embedder("\x00common direction", dimension, seed)

    def embed_one(self, text: str) -> np.ndarray:
        v = test_embedder(self.prefix + text, self.dimension, self.seed)
        if self.anisotropy:
            v = np.sqrt(self.anisotropy) * self._common + np.sqrt(1.0 - self.anisotropy) * v
            v /= np.linalg.norm(v)
        return v

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.embed_one(t) for t in texts])


class HttpEmbedder:
    def __init__(self, config: EmbedderConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.dimension = config.dimension
        self.prefix = config.prefix
        self.model_id = config.model
        self.calls = 0
        self._http = httpx.Client(timeout=config.timeout, transport=transport)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        cfg = self.config
        headers = {}
        token = os.environ.get(cfg.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self.calls += 1
        data = post_with_retries(
            self._http,
            cfg.base_url.rstrip("/") + "/embeddings",
            {"model": cfg.model, "input": [self.prefix + t for t in texts]},
            headers,
            cfg.max_retries,
            cfg.backoff,
        )
        try:
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors = [item["embedding"] for item in items]
        except (KeyError, TypeError, AttributeError):
            raise EndpointError(f"malformed embeddings response: {str(data)[:200]}") from None
        if len(vectors) != len(texts):
            raise EndpointError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        for vec in vectors:
            if len(vec) != self.dimension:
                raise EmbeddingDimensionError(
                    f"embedding endpoint returned {len(vec)} values, configured dimension is "
                    f"{self.dimension}"
                )
        out = np.asarray(vectors, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise EndpointError("embedding endpoint returned non-finite values")
        return out


def make_embedder(config: EmbedderConfig):
    if config.mode == "hash":
        return HashEmbedder(config.dimension, config.seed, config.prefix, config.anisotropy)
    return HttpEmbedder(config)


def embed_texts(texts: Sequence[str], embedder, cache: FileCache | None = None) -> np.ndarray:
    """Embed ``texts`` into an ``(len(texts), D)`` array, order-aligned with the input.

    Cache keys are SHA-256(prefix, text, model id). Batches that fail after retries are
    reported together in one :class:`EmbeddingTransportError`; successful batches stay cached.
    """
    if any(not isinstance(t, str) or not t for t in texts):
        raise ValueError("texts must be non-empty strings")
    dim = embedder.dimension
    out = np.empty((len(texts), dim))
    todo: dict[str, list[int]] = {}
    for i, text in enumerate(texts):
        key = content_key(embedder.prefix, text, embedder.model_id)
        hit = cache.get(key) if cache is not None else None
        if hit is not None:
            vec = np.asarray(hit["vector"], dtype=np.float64)
            if vec.shape != (dim,):
                raise EmbeddingDimensionError(
                    f"cached vector has {vec.size} values, configured dimension is {dim}"
                )
            out[i] = vec
        else:
            todo.setdefault(text, []).append(i)

    unique = list(todo)
    batch_size = getattr(getattr(embedder, "config", None), "batch_size", 64)
    failed: list[str] = []
    for start in range(0, len(unique), batch_size):
        batch = unique[start : start + batch_size]
        try:
            vectors = embedder.embed_batch(batch)
        except EndpointError as exc:
            logger.warning("embedding batch failed: %s", exc)
            failed.extend(batch)
            continue
        for text, vec in zip(batch, vectors):
            for i in todo[text]:
                out[i] = vec
            if cache is not None:
                cache.put(
                    content_key(embedder.prefix, text, embedder.model_id),
                    {"model": embedder.model_id, "text": text, "vector": vec.tolist()},
                )
    if failed:
        raise EmbeddingTransportError(f"{len(failed)} text(s) could not be embedded", failed)
    return out


def cosine_similarity(a, b) -> float:
    """Cosine similarity clamped to [-1, 1]; zero-norm input gives 0 with a warning."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    ua, ub = _unit(a), _unit(b)
    if ua is None or ub is None:
        warnings.warn("cosine similarity of a zero vector is defined as 0", ZeroNormWarning, 2)
        return 0.0
    return float(np.clip(np.dot(ua, ub), -1.0, 1.0))


def _unit(v: np.ndarray) -> np.ndarray | None:
    # rescale by the largest magnitude first so tiny entries do not underflow when squared
    m = np.abs(v).max(initial=0.0)
    if m == 0:
        return None
    v = v / m
    return v / np.linalg.norm(v)


def cosine_matrix(vectors) -> np.ndarray:
    """Pairwise cosine similarities; rows with zero norm give 0 everywhere (diagonal included)."""
    x = np.asarray(vectors, dtype=np.float64)
    peak = np.abs(x).max(axis=1, initial=0.0)
    x = x / np.where(peak > 0, peak, 1.0)[:, None]
    norms = np.linalg.norm(x, axis=1)
    unit = x / np.where(norms > 0, norms, 1.0)[:, None]
    sim = unit @ unit.T
    return np.clip(sim, -1.0, 1.0)


def save_vectors(path: str | Path, keys: Sequence[str], vectors: np.ndarray, model_id: str) -> None:
    """Vector store: ``.npz`` with ``version``, ``model``, ``keys`` (str) and ``vectors`` (float64 N x D)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(keys) != len(vectors):
        raise ValueError("keys and vectors differ in length")
    with open(path, "wb") as fh:
        np.savez(
            fh,
            version=np.array(VECTOR_STORE_VERSION),
            model=np.array(model_id),
            keys=np.array(list(keys), dtype=str),
            vectors=vectors,
        )


def load_vectors(path: str | Path) -> tuple[dict[str, np.ndarray], str]:
    with np.load(path, allow_pickle=False) as data:
        version = str(data["version"])
        if version != VECTOR_STORE_VERSION:
            raise ValueError(f"unsupported vector store version {version!r}")
        keys = [str(k) for k in data["keys"]]
        vectors = data["vectors"]
        model = str(data["model"])
    return dict(zip(keys, vectors)), model
