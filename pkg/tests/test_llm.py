import json
import os

import pytest
import requests

from curricula.errors import AuthError, BackendUnavailable
from curricula.llm import ENV_URL, HttpChatBackend, StubBackend, make_scripted_stub
from curricula.prompts import ANALYSIS_PROMPT, ANALYSIS_SLOT, PERTURB_PROMPT_TEMPLATE


def test_stub_echoes_fixture():
    backend = StubBackend(replies=["canned"])
    assert backend.complete("anything") == "canned"
    assert backend.requests[0]["prompt"] == "anything"


def test_scripted_stub_routes_by_prompt():
    backend = make_scripted_stub("chair_1")
    move = json.loads(backend.complete(PERTURB_PROMPT_TEMPLATE))
    assert move["object_id"] == "chair_1"
    assert backend.complete("The previous scene edit intended to: x.") == "yes"
    analysis = json.loads(backend.complete(ANALYSIS_PROMPT))
    assert set(analysis) == {"outcome", "concerns", "suggestions"}


def test_prompt_templates_match_goldens(data_dir):
    assert ANALYSIS_PROMPT == (data_dir / "analysis_prompt.txt").read_text()
    assert PERTURB_PROMPT_TEMPLATE == (data_dir / "perturb_prompt_template.txt").read_text()
    assert ANALYSIS_SLOT in PERTURB_PROMPT_TEMPLATE


class _FakeResponse:
    def __init__(self, status_code, payload=None):
        self.status_code = status_code
        self._payload = payload or {}

    def json(self):
        return self._payload


def _chat_payload(text):
    return {"choices": [{"message": {"content": text}}]}


def _tool_payload(args):
    return {"choices": [{"message": {
        "tool_calls": [{"function": {"name": "f", "arguments": args}}]}}]}


def test_retry_then_success(monkeypatch):
    backend = HttpChatBackend(url="http://example.invalid/chat", key="k")
    responses = [_FakeResponse(500), _FakeResponse(500),
                 _FakeResponse(200, _chat_payload("hello"))]
    calls = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append(json)
        return responses[len(calls) - 1]

    monkeypatch.setattr(backend._session, "post", fake_post)
    monkeypatch.setattr("curricula.llm.time.sleep", lambda s: None)
    assert backend.complete("hi") == "hello"
    assert len(calls) == 3


def test_gives_up_after_three_attempts(monkeypatch):
    backend = HttpChatBackend(url="http://example.invalid/chat")
    monkeypatch.setattr(backend._session, "post",
                        lambda *a, **k: _FakeResponse(503))
    monkeypatch.setattr("curricula.llm.time.sleep", lambda s: None)
    with pytest.raises(BackendUnavailable):
        backend.complete("hi")


def test_auth_error_not_retried(monkeypatch):
    backend = HttpChatBackend(url="http://example.invalid/chat")
    calls = []

    def fake_post(*a, **k):
        calls.append(1)
        return _FakeResponse(401)

    monkeypatch.setattr(backend._session, "post", fake_post)
    with pytest.raises(AuthError):
        backend.complete("hi")
    assert len(calls) == 1


def test_tool_call_arguments_extracted(monkeypatch):
    backend = HttpChatBackend(url="http://example.invalid/chat")
    args = json.dumps({"object_id": "chair_1"})
    monkeypatch.setattr(backend._session, "post",
                        lambda *a, **k: _FakeResponse(200, _tool_payload(args)))
    assert backend.complete("hi", schema={"name": "f"}) == args


def test_request_body_shape(monkeypatch):
    backend = HttpChatBackend(url="http://example.invalid/chat", key="secret",
                              model="test-model")
    captured = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        captured["body"] = json
        captured["headers"] = headers
        return _FakeResponse(200, _chat_payload("ok"))

    monkeypatch.setattr(backend._session, "post", fake_post)
    schema = {"type": "function", "name": "f", "parameters": {}}
    backend.complete("prompt text", image=b"\x89PNG", schema=schema,
                     extra_text="summary")
    body = captured["body"]
    assert body["model"] == "test-model"
    assert body["tools"] == [schema]  # schema forwarded verbatim
    parts = body["messages"][0]["content"]
    assert parts[0] == {"type": "text", "text": "prompt text"}
    assert parts[1]["type"] == "image_url"
    assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")
    assert parts[2] == {"type": "text", "text": "summary"}
    assert captured["headers"]["Authorization"] == "Bearer secret"


def test_from_env_requires_url(monkeypatch):
    monkeypatch.delenv(ENV_URL, raising=False)
    with pytest.raises(BackendUnavailable):
        HttpChatBackend.from_env()


@pytest.mark.skipif(not os.environ.get(ENV_URL), reason="live endpoint not configured")
def test_live_smoke():
    backend = HttpChatBackend.from_env()
    reply = backend.complete("Reply with the single word: ok")
    assert reply.strip()
