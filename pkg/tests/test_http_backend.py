"""Wire-level behavior of the HTTP clients, with httpx.post monkeypatched."""

from __future__ import annotations

import base64
import json

import httpx
import pytest

from coig.backends import (
    BackendConfig,
    llm_complete,
    mllm_answer,
    mllm_census,
    t2i_generate,
)
from coig.errors import AuthError, CensusParseError, RateLimited, TransportError
from coig.scene import ImageArtifact, SceneDocument, SceneEntity

CFG = BackendConfig(endpoint_url="https://api.example.test", max_retries=2, retry_backoff=0.0)

PNG = b"\x89PNG\r\n\x1a\n" + b"\x00" * 16


def fake_response(status: int, payload=None, text=""):
    return httpx.Response(
        status_code=status,
        json=payload if payload is not None else None,
        text=text if payload is None else None,
        request=httpx.Request("POST", "https://api.example.test"),
    )


class PostRecorder:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def __call__(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def art():
    return ImageArtifact.from_scene(SceneDocument(entities=(SceneEntity(id="e1", cls="dog"),)))


class TestRetries:
    def test_retries_then_succeeds(self, monkeypatch):
        recorder = PostRecorder([
            fake_response(503),
            fake_response(502),
            fake_response(200, {"text": "ok"}),
        ])
        monkeypatch.setattr(httpx, "post", recorder)
        monkeypatch.setattr("coig.backends._sleep", lambda cfg, attempt: None)
        assert llm_complete("sys", "user", CFG) == "ok"
        assert len(recorder.calls) == 3
        assert recorder.calls[0]["url"] == "https://api.example.test/v1/complete"

    def test_rate_limit_exhausts_to_rate_limited(self, monkeypatch):
        recorder = PostRecorder([fake_response(429)] * 3)
        monkeypatch.setattr(httpx, "post", recorder)
        monkeypatch.setattr("coig.backends._sleep", lambda cfg, attempt: None)
        with pytest.raises(RateLimited):
            llm_complete("sys", "user", CFG)
        assert len(recorder.calls) == 3  # initial try + max_retries

    def test_server_error_exhausts_to_transport_error(self, monkeypatch):
        recorder = PostRecorder([fake_response(500)] * 3)
        monkeypatch.setattr(httpx, "post", recorder)
        monkeypatch.setattr("coig.backends._sleep", lambda cfg, attempt: None)
        with pytest.raises(TransportError):
            llm_complete("sys", "user", CFG)

    def test_auth_error_is_not_retried(self, monkeypatch):
        recorder = PostRecorder([fake_response(401)])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(AuthError):
            llm_complete("sys", "user", CFG)
        assert len(recorder.calls) == 1

    def test_client_error_is_not_retried(self, monkeypatch):
        recorder = PostRecorder([fake_response(404, text="missing")])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(TransportError):
            llm_complete("sys", "user", CFG)
        assert len(recorder.calls) == 1

    def test_connection_error_retried_then_raised(self, monkeypatch):
        recorder = PostRecorder([
            httpx.ConnectError("refused"),
            httpx.ConnectError("refused"),
            httpx.ConnectError("refused"),
        ])
        monkeypatch.setattr(httpx, "post", recorder)
        monkeypatch.setattr("coig.backends._sleep", lambda cfg, attempt: None)
        with pytest.raises(TransportError):
            llm_complete("sys", "user", CFG)
        assert len(recorder.calls) == 3


class TestAuthHeaders:
    def test_token_read_from_environment(self, monkeypatch):
        cfg = BackendConfig(endpoint_url="https://api.example.test",
                            auth_token_env_var="COIG_TEST_TOKEN")
        monkeypatch.setenv("COIG_TEST_TOKEN", "s3cret")
        recorder = PostRecorder([fake_response(200, {"text": "ok"})])
        monkeypatch.setattr(httpx, "post", recorder)
        llm_complete("sys", "user", cfg)
        assert recorder.calls[0]["headers"] == {"Authorization": "Bearer s3cret"}

    def test_missing_token_sends_no_header(self, monkeypatch):
        cfg = BackendConfig(endpoint_url="https://api.example.test",
                            auth_token_env_var="COIG_ABSENT_TOKEN")
        monkeypatch.delenv("COIG_ABSENT_TOKEN", raising=False)
        recorder = PostRecorder([fake_response(200, {"text": "ok"})])
        monkeypatch.setattr(httpx, "post", recorder)
        llm_complete("sys", "user", cfg)
        assert recorder.calls[0]["headers"] == {}


class TestPayloads:
    def test_generate_decodes_image_reply(self, monkeypatch):
        reply = {"png_base64": base64.b64encode(PNG).decode(), "width": 512, "height": 512}
        recorder = PostRecorder([fake_response(200, reply)])
        monkeypatch.setattr(httpx, "post", recorder)
        image = t2i_generate("a red apple", CFG)
        assert image.media_kind == "raster_png"
        assert image.data == PNG

    def test_generate_malformed_reply(self, monkeypatch):
        recorder = PostRecorder([fake_response(200, {"png_base64": "!!!not-base64", "width": 1, "height": 1})])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(TransportError):
            t2i_generate("a red apple", CFG)

    def test_llm_reply_without_text(self, monkeypatch):
        recorder = PostRecorder([fake_response(200, {"output": "ok"})])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(TransportError):
            llm_complete("sys", "user", CFG)

    def test_answer_normalized(self, monkeypatch):
        recorder = PostRecorder([fake_response(200, {"answer": " YES "})])
        monkeypatch.setattr(httpx, "post", recorder)
        assert mllm_answer(art(), "Is the dog present?", CFG) == "yes"

    def test_non_binary_answer_rejected(self, monkeypatch):
        recorder = PostRecorder([fake_response(200, {"answer": "probably"})])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(TransportError):
            mllm_answer(art(), "Is the dog present?", CFG)

    def test_census_parsed_and_validated(self, monkeypatch):
        payload = {"entries": [
            {"census_id": "P1", "class": "dog", "attributes": ["red"],
             "interactions": [{"verb": "chasing", "target_census_id": "P2"}]},
            {"census_id": "P2", "class": "cat"},
        ]}
        recorder = PostRecorder([fake_response(200, payload)])
        monkeypatch.setattr(httpx, "post", recorder)
        report = mllm_census(art(), CFG)
        assert [e.census_id for e in report.entries] == ["P1", "P2"]

    def test_census_with_unknown_target_rejected(self, monkeypatch):
        payload = {"entries": [
            {"census_id": "P1", "class": "dog",
             "interactions": [{"verb": "chasing", "target_census_id": "P9"}]},
        ]}
        recorder = PostRecorder([fake_response(200, payload)])
        monkeypatch.setattr(httpx, "post", recorder)
        with pytest.raises(CensusParseError):
            mllm_census(art(), CFG)
