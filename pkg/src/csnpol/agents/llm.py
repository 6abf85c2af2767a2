"""Chat-completion transport shared by every agent role."""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import httpx

from ..errors import LLMTimeoutError, TransportError

log = logging.getLogger(__name__)

RETRY_STATUSES = frozenset({408, 409, 429, 500, 502, 503, 504})


class Role(str, enum.Enum):
    DOMAIN_SPECIALIST = "domain_specialist"
    SUBGROUP_EXPLORER = "subgroup_explorer"
    SOCIAL_MEDIA_VETERAN = "social_media_veteran"
    LINGUISTIC_EXPERT = "linguistic_expert"
    SENTIMENT_EXPERT = "sentiment_expert"
    POLARIZATION_ASSESSOR = "polarization_assessor"


class Backend(str, enum.Enum):
    REMOTE = "remote"
    MOCK = "mock"


# cheaper model for background mining and semantic analysis, stronger one for the assessor
DEFAULT_MODELS = {
    Role.DOMAIN_SPECIALIST: "gpt-3.5-turbo",
    Role.SUBGROUP_EXPLORER: "gpt-3.5-turbo",
    Role.SOCIAL_MEDIA_VETERAN: "gpt-3.5-turbo",
    Role.LINGUISTIC_EXPERT: "gpt-3.5-turbo",
    Role.SENTIMENT_EXPERT: "gpt-3.5-turbo",
    Role.POLARIZATION_ASSESSOR: "gpt-4",
}


def load_prompt(role: Role, prompts_dir: str | Path | None = None) -> str:
    name = f"{Role(role).value}.txt"
    if prompts_dir is not None:
        return Path(prompts_dir, name).read_text(encoding="utf-8")
    return resources.files("csnpol").joinpath("prompts", name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class AgentConfig:
    role: Role
    backend: Backend = Backend.MOCK
    model_name: str = ""
    prompt_template: str = ""
    temperature: float = 0.0
    max_retries: int = 4
    timeout: float = 60.0
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    api_key: str | None = field(default=None, repr=False)
    requests_per_minute: float | None = None
    backoff_base: float = 1.0
    mock_lexicon: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "backend", Backend(self.backend))
        if not self.model_name:
            object.__setattr__(self, "model_name", DEFAULT_MODELS[self.role] if self.backend is Backend.REMOTE else "mock")
        if not self.prompt_template:
            object.__setattr__(self, "prompt_template", load_prompt(self.role))
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")

    def credential(self) -> str | None:
        return self.api_key or os.environ.get(self.api_key_env)

    def public_dict(self) -> dict:
        """Serializable view without the credential."""
        return {
            "role": self.role.value,
            "backend": self.backend.value,
            "model_name": self.model_name,
            "prompt_template": self.prompt_template,
            "temperature": self.temperature,
            "max_retries": self.max_retries,
            "timeout": self.timeout,
            "base_url": self.base_url if self.backend is Backend.REMOTE else None,
            "mock_lexicon": self.mock_lexicon,
        }

    def with_(self, **changes) -> "AgentConfig":
        return replace(self, **changes)


class Throttle:
    """Process-wide minimum spacing between requests."""

    def __init__(self, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self._lock = threading.Lock()
        self._next = 0.0
        self._clock = clock
        self._sleep = sleep

    def wait(self, requests_per_minute: float | None) -> None:
        if not requests_per_minute:
            return
        interval = 60.0 / requests_per_minute
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + interval
        if start > now:
            self._sleep(start - now)

    def reset(self) -> None:
        with self._lock:
            self._next = 0.0


THROTTLE = Throttle()


def llm_complete(messages: list[dict], config: AgentConfig, *, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> str:
    """Send ``messages`` to the configured backend and return the assistant text.

    The mock backend answers from its rule tables and never opens a socket.
    Remote calls make at most ``config.max_retries`` attempts, backing off
    exponentially on 429, 5xx, timeouts and connection errors.
    """
    if config.backend is Backend.MOCK:
        from .mock import mock_reply

        return mock_reply(config.role, messages, config.mock_lexicon)

    key = config.credential()
    if not key:
        raise TransportError(f"no credential: set ${config.api_key_env}")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = {"model": config.model_name, "messages": messages, "temperature": config.temperature}
    headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=config.timeout)
    try:
        last_exc: Exception | None = None
        for attempt in range(1, config.max_retries + 1):
            THROTTLE.wait(config.requests_per_minute)
            delay = config.backoff_base * 2 ** (attempt - 1)
            try:
                resp = client.post(url, json=body, headers=headers, timeout=config.timeout)
            except httpx.TimeoutException as exc:
                last_exc = LLMTimeoutError(f"request timed out after {config.timeout}s")
                log.warning("attempt %d/%d timed out", attempt, config.max_retries)
            except httpx.TransportError as exc:
                last_exc = TransportError(f"connection failed: {exc}", attempts=attempt)
                log.warning("attempt %d/%d failed: %s", attempt, config.max_retries, exc)
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError):
                        raise TransportError("malformed chat-completion response", attempts=attempt,
                                             status=200) from None
                last_exc = TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}",
                                          attempts=attempt, status=resp.status_code)
                if resp.status_code not in RETRY_STATUSES:
                    raise last_exc
                retry_after = resp.headers.get("retry-after")
                if retry_after:
                    try:
                        delay = max(delay, float(retry_after))
                    except ValueError:
                        pass
                log.warning("attempt %d/%d got HTTP %d", attempt, config.max_retries, resp.status_code)
            if attempt < config.max_retries:
                sleep(delay)
        if isinstance(last_exc, TransportError):
            last_exc.attempts = config.max_retries
        raise last_exc
    finally:
        if own_client:
            client.close()


_JSON_BLOCK = re.compile(r"\{.*\}", re.DOTALL)


def parse_json_reply(text: str) -> dict:
    """Pull the first JSON object out of a reply, tolerating code fences and chatter."""
    text = text.strip()
    try:
        obj = json.loads(text)
    except ValueError:
        m = _JSON_BLOCK.search(text)
        if not m:
            raise ValueError("reply holds no JSON object") from None
        obj = json.loads(m.group(0))
    if not isinstance(obj, dict):
        raise ValueError("reply is not a JSON object")
    return obj
