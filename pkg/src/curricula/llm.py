"""Chat-completion client plus a deterministic stub for offline use.

Any endpoint speaking the JSON chat-completion dialect works; the model
name, URL and credential come from the environment:

    CURRICULA_LLM_URL    full chat-completions endpoint URL
    CURRICULA_LLM_KEY    bearer credential
    CURRICULA_LLM_MODEL  model name string

Tool schemas are forwarded verbatim so the wire format matches the
declared function-calling contract field for field.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from . import config
from .errors import AuthError, BackendUnavailable

logger = logging.getLogger(__name__)

ENV_URL = "CURRICULA_LLM_URL"
ENV_KEY = "CURRICULA_LLM_KEY"
ENV_MODEL = "CURRICULA_LLM_MODEL"


class LLMBackend(Protocol):
    def complete(self, prompt: str, image: bytes | None = None,
                 schema: dict | None = None, extra_text: str | None = None) -> str:
        """Return a single reply string for one request."""
        ...


@dataclass
class StubBackend:
    """Deterministic canned-reply backend for tests and offline runs.

    ``replies`` may be a list (consumed in order, last one repeating) or a
    callable mapping the prompt to a reply. Every request is recorded.
    """

    replies: list[str] | Callable[[str], str]
    requests: list[dict] = field(default_factory=list)

    def complete(self, prompt: str, image: bytes | None = None,
                 schema: dict | None = None, extra_text: str | None = None) -> str:
        self.requests.append({
            "prompt": prompt,
            "has_image": image is not None,
            "schema": schema,
            "extra_text": extra_text,
        })
        if callable(self.replies):
            return self.replies(prompt)
        idx = min(len(self.requests) - 1, len(self.replies) - 1)
        return self.replies[idx]


def make_scripted_stub(movable_id: str, x_units: float = 20, y_units: float = 5) -> StubBackend:
    """Stub that answers each prompt kind plausibly, for offline loop runs."""
    move = json.dumps({
        "object_id": movable_id,
        "x_direction": "right",
        "x_units": x_units,
        "y_direction": "up",
        "y_units": y_units,
        "rotation": 0,
    })

    def reply(prompt: str) -> str:
        if "propose_move_instruction" in prompt:
            return move
        if prompt.startswith("The previous scene edit intended"):
            return "yes"
        return json.dumps({"outcome": "success", "concerns": [], "suggestions": []})

    return StubBackend(replies=reply)


@dataclass
class HttpChatBackend:
    """Minimal chat-completions client with retries and bounded concurrency."""

    url: str
    key: str = ""
    model: str = "small-multimodal-chat"
    temperature: float = config.DEFAULTS["llm.temperature"]
    timeout: float = config.DEFAULTS["llm.timeout"]
    max_attempts: int = 3
    max_inflight: int = config.DEFAULTS["llm.max_inflight"]

    def __post_init__(self):
        self._gate = threading.Semaphore(self.max_inflight)
        self._session = requests.Session()

    @classmethod
    def from_env(cls) -> "HttpChatBackend":
        url = os.environ.get(ENV_URL, "")
        if not url:
            raise BackendUnavailable(f"{ENV_URL} is not configured")
        return cls(
            url=url,
            key=os.environ.get(ENV_KEY, ""),
            model=os.environ.get(ENV_MODEL, "small-multimodal-chat"),
        )

    def _body(self, prompt: str, image: bytes | None, schema: dict | None,
              extra_text: str | None) -> dict:
        content: list[dict] = [{"type": "text", "text": prompt}]
        if image is not None:
            encoded = base64.b64encode(image).decode("ascii")
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{encoded}"},
            })
        if extra_text:
            content.append({"type": "text", "text": extra_text})
        body: dict = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        if schema is not None:
            body["tools"] = [schema]  # forwarded verbatim
        return body

    @staticmethod
    def _extract_text(payload: dict) -> str:
        choice = payload["choices"][0]
        message = choice.get("message", {})
        calls = message.get("tool_calls")
        if calls:
            fn = calls[0].get("function", calls[0])
            args = fn.get("arguments", "")
            return args if isinstance(args, str) else json.dumps(args)
        return message.get("content") or ""

    def complete(self, prompt: str, image: bytes | None = None,
                 schema: dict | None = None, extra_text: str | None = None) -> str:
        body = self._body(prompt, image, schema, extra_text)
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        logger.info("llm request: model=%s prompt_bytes=%d image=%s tool=%s",
                    self.model, len(prompt), image is not None,
                    (schema or {}).get("name"))
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(0.5 * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self._session.post(self.url, json=body,
                                              headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                last = e
                logger.warning("llm transport error (attempt %d): %s", attempt + 1, e)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credential (HTTP {resp.status_code})")
            if resp.status_code >= 500 or resp.status_code == 429:
                last = BackendUnavailable(f"HTTP {resp.status_code}")
                logger.warning("llm retriable failure (attempt %d): HTTP %d",
                               attempt + 1, resp.status_code)
                continue
            try:
                payload = resp.json()
                text = self._extract_text(payload)
            except (ValueError, KeyError, IndexError) as e:
                last = BackendUnavailable(f"unparseable response: {e}")
                continue
            logger.info("llm response: %d bytes", len(text))
            return text
        raise BackendUnavailable(f"gave up after {self.max_attempts} attempts: {last}")
