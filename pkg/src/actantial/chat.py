"""Chat-completion clients: an OpenAI-compatible HTTP client and a canned-response stub."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

logger = logging.getLogger(__name__)


class EndpointError(Exception):
    """The endpoint failed (transport error or non-2xx status) after all retries."""


@dataclass
class ChatConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "meta-llama/Meta-Llama-3-8B-Instruct"
    api_key_env: str = "ACTANTIAL_CHAT_API_KEY"
    timeout: float = 120.0
    max_retries: int = 3
    backoff: float = 1.0
    max_tokens: int = 512
    concurrency: int = 4
    max_body_chars: int | None = 24000
    mode: str = "http"  # "http" or "stub"
    stub_path: str | None = None

    def validate(self) -> list[str]:
        problems = []
        if self.mode not in ("http", "stub"):
            problems.append(f"chat.mode must be 'http' or 'stub', got {self.mode!r}")
        if self.mode == "stub" and not self.stub_path:
            problems.append("chat.stub_path is required in stub mode")
        if self.max_retries < 1:
            problems.append("chat.max_retries must be >= 1")
        if self.concurrency < 1:
            problems.append("chat.concurrency must be >= 1")
        if self.max_body_chars is not None and self.max_body_chars < 1:
            problems.append("chat.max_body_chars must be positive")
        return problems


def greedy_payload(model: str, prompt: str, max_tokens: int) -> dict:
    """Request body with sampling disabled: the highest-probability token is taken at every step."""
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
        "top_p": 1,
        "n": 1,
        "max_tokens": max_tokens,
    }


def post_with_retries(
    client: httpx.Client, url: str, payload: dict, headers: dict, retries: int, backoff: float
) -> dict:
    last: Exception | None = None
    for attempt in range(retries):
        try:
            resp = client.post(url, json=payload, headers=headers)
            if 400 <= resp.status_code < 500:
                # client errors will not improve on retry
                raise EndpointError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            if resp.status_code >= 500:
                raise httpx.HTTPStatusError(
                    f"HTTP {resp.status_code}", request=resp.request, response=resp
                )
            return resp.json()
        except EndpointError:
            raise
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            last = exc
            logger.debug("attempt %d/%d to %s failed: %s", attempt + 1, retries, url, exc)
            if attempt < retries - 1 and backoff > 0:
                time.sleep(backoff * 2**attempt)
    raise EndpointError(f"{url} failed after {retries} attempts: {last}") from last


class ChatClient:
    def __init__(self, config: ChatConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.model = config.model
        self.calls = 0
        self._http = httpx.Client(timeout=config.timeout, transport=transport)

    def complete(self, prompt: str, article_id: str | None = None) -> str:
        cfg = self.config
        headers = {}
        token = os.environ.get(cfg.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self.calls += 1
        data = post_with_retries(
            self._http,
            cfg.base_url.rstrip("/") + "/chat/completions",
            greedy_payload(cfg.model, prompt, cfg.max_tokens),
            headers,
            cfg.max_retries,
            cfg.backoff,
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError(f"malformed chat response: {str(data)[:200]}") from None
        if not isinstance(content, str):
            raise EndpointError("chat response content is not a string")
        return content

    def close(self) -> None:
        self._http.close()


class StubChatClient:
    """Serves canned responses from a JSONL file of ``{"id": ..., "response": ...}`` records.

    A directory may be given instead, in which case ``responses.jsonl`` inside it is used.
    Unknown article ids raise :class:`EndpointError`, like an unreachable server.
    """

    def __init__(self, path: str | Path, model: str = "stub"):
        path = Path(path)
        if path.is_dir():
            path = path / "responses.jsonl"
        self.responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.responses[rec["id"]] = rec["response"]
        self.model = model
        self.calls = 0

    def complete(self, prompt: str, article_id: str | None = None) -> str:
        self.calls += 1
        try:
            return self.responses[article_id]
        except KeyError:
            raise EndpointError(f"no canned response for article {article_id!r}") from None

    def close(self) -> None:
        pass


def make_chat_client(config: ChatConfig):
    if config.mode == "stub":
        return StubChatClient(config.stub_path, model=config.model)
    return ChatClient(config)
