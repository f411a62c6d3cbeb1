"""OpenAI-compatible completion client with retries and a record/replay cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .prompting import PromptInstance

logger = logging.getLogger(__name__)

CACHE_MODES = ("off", "record", "replay", "replay-strict")
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


class LLMError(Exception):
    pass


class TransportFailure(LLMError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class EndpointStatusError(LLMError):
    def __init__(self, status: int, body: str, attempts: int = 1):
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body_excerpt = body[:200]
        self.attempts = attempts


class CacheMissError(LLMError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    model_name: str = ""
    temperature: float = 1.0
    top_p: float = 1.0
    top_k: int = 50
    max_new_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str | None = None
    api_key: str | None = None
    api: str = "chat"  # "chat" or "completions"
    timeout: float = 60.0
    max_retries: int = 3
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        kw = {"base_url": os.environ.get("RELEX_LLM_ENDPOINT"),
              "api_key": os.environ.get("RELEX_LLM_API_KEY")}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def delay(self, retry: int) -> float:
        return self.backoff[min(retry, len(self.backoff) - 1)] if self.backoff else 0.0


def default_model() -> str:
    return os.environ.get("RELEX_LLM_MODEL", "")


@dataclass(frozen=True)
class RawCompletion:
    prompt_hash: str
    text: str
    model_name: str
    latency_ms: float
    retrieved_from_cache: bool = False
    created_at: str = ""


def prompt_hash(prompt: str, params: GenerationParams) -> str:
    """SHA-256 over the prompt text and every decoding parameter."""
    payload = json.dumps({"prompt": prompt, "params": asdict(params)}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class ResponseCache:
    """Append-only JSON-lines map from prompt hash to recorded response.

    Later records for the same hash win. Writes go through one lock.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        self._entries[rec["prompt_hash"]] = rec
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise LLMError(f"{self.path}:{lineno}: bad cache record: {exc}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def records(self) -> list[dict]:
        return list(self._entries.values())

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def put(self, key: str, prompt: str, params: GenerationParams, response: str,
            timestamp: str | None = None) -> dict:
        rec = {"prompt_hash": key, "prompt": prompt, "params": asdict(params),
               "response": response, "timestamp": timestamp or _now()}
        with self._lock:
            self._entries[key] = rec
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return rec


class LLMClient:
    """Sends prompts to a chat/completions endpoint.

    ``cache_mode`` controls the cache: ``off`` ignores it, ``record`` serves
    hits and records live misses, ``replay`` serves hits and calls live on
    misses without recording, ``replay-strict`` fails on any miss.
    """

    def __init__(
        self,
        params: GenerationParams = GenerationParams(),
        endpoint: EndpointConfig = EndpointConfig(),
        cache: ResponseCache | None = None,
        cache_mode: str = "off",
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if cache_mode not in CACHE_MODES:
            raise ValueError(f"cache_mode must be one of {CACHE_MODES}")
        self.params = params
        self.endpoint = endpoint
        self.cache = cache if cache is not None else ResponseCache()
        self.cache_mode = cache_mode
        self._sleep = sleep
        self._transport = transport
        self._http: httpx.Client | None = None
        self._http_lock = threading.Lock()

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self) -> "LLMClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _client(self) -> httpx.Client:
        with self._http_lock:
            if self._http is None:
                if not self.endpoint.base_url:
                    raise LLMError("no endpoint configured (set RELEX_LLM_ENDPOINT)")
                headers = {}
                if self.endpoint.api_key:
                    headers["Authorization"] = f"Bearer {self.endpoint.api_key}"
                self._http = httpx.Client(base_url=self.endpoint.base_url.rstrip("/"),
                                          headers=headers, timeout=self.endpoint.timeout,
                                          transport=self._transport)
            return self._http

    def _payload(self, prompt: str) -> tuple[str, dict]:
        p = self.params
        body = {"model": p.model_name, "temperature": p.temperature, "top_p": p.top_p,
                "top_k": p.top_k, "max_tokens": p.max_new_tokens}
        if self.endpoint.api == "completions":
            return "/completions", {**body, "prompt": prompt}
        return "/chat/completions", {**body, "messages": [{"role": "user", "content": prompt}]}

    @staticmethod
    def _extract_text(data: dict) -> str:
        try:
            choice = data["choices"][0]
            if "message" in choice:
                return choice["message"]["content"] or ""
            return choice["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LLMError(f"unexpected response shape: {exc}") from None

    def _call(self, prompt: str) -> str:
        url, payload = self._payload(prompt)
        client = self._client()
        attempts = 0
        while True:
            attempts += 1
            try:
                resp = client.post(url, json=payload)
            except httpx.TransportError as exc:
                if attempts > self.endpoint.max_retries:
                    raise TransportFailure(f"request failed: {exc!r}", attempts) from exc
                logger.warning("transport error (%r), retry %d", exc, attempts)
            else:
                if resp.status_code < 300:
                    try:
                        return self._extract_text(resp.json())
                    except json.JSONDecodeError:
                        raise LLMError(f"non-JSON response body: {resp.text[:200]}") from None
                if resp.status_code not in RETRY_STATUSES or attempts > self.endpoint.max_retries:
                    raise EndpointStatusError(resp.status_code, resp.text, attempts)
                logger.warning("HTTP %d from endpoint, retry %d", resp.status_code, attempts)
            self._sleep(self.endpoint.delay(attempts - 1))

    def complete(self, prompt: PromptInstance | str) -> RawCompletion:
        text = prompt.text if isinstance(prompt, PromptInstance) else prompt
        key = prompt_hash(text, self.params)
        if self.cache_mode != "off":
            hit = self.cache.get(key)
            if hit is not None:
                return RawCompletion(key, hit["response"], self.params.model_name, 0.0, True,
                                     hit.get("timestamp", ""))
            if self.cache_mode == "replay-strict":
                raise CacheMissError(f"cache miss in replay mode for prompt {key[:12]}")
        t0 = time.perf_counter()
        response = self._call(text)
        latency = (time.perf_counter() - t0) * 1000.0
        stamp = _now()
        if self.cache_mode == "record":
            self.cache.put(key, text, self.params, response, stamp)
        return RawCompletion(key, response, self.params.model_name, latency, False, stamp)

    def batch_complete(self, prompts: Sequence[PromptInstance | str],
                       max_in_flight: int = 4) -> list[RawCompletion | LLMError]:
        """Complete all prompts, in input order, with bounded concurrency.

        A failed prompt leaves its :class:`LLMError` in its slot.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

        def one(p):
            try:
                return self.complete(p)
            except LLMError as exc:
                return exc

        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=min(max_in_flight, len(prompts))) as pool:
            return list(pool.map(one, prompts))


def complete(prompt: PromptInstance | str, params: GenerationParams, endpoint: EndpointConfig,
             **client_kw) -> RawCompletion:
    with LLMClient(params, endpoint, **client_kw) as client:
        return client.complete(prompt)


def batch_complete(prompts: Sequence[PromptInstance | str], params: GenerationParams,
                   endpoint: EndpointConfig, max_in_flight: int = 4,
                   **client_kw) -> list[RawCompletion | LLMError]:
    with LLMClient(params, endpoint, **client_kw) as client:
        return client.batch_complete(prompts, max_in_flight)
