"""Uniform access to the three model roles: text LLM, image generate/edit,
and multimodal evaluator.

Each operation dispatches on the config's endpoint scheme:

* ``mock://...`` — deterministic in-process implementation backed by
  structured scene documents. Query parameters inject faults for testing
  (``fault=merge`` drops one entity from single-pass renders, ``fault=down``
  fails every call).
* ``http://`` / ``https://`` — JSON-over-HTTP clients with retries,
  exponential backoff and jitter. Auth tokens are read from the environment
  variable named in the config, never stored.
"""

from __future__ import annotations

import base64
import os
import random
import time
from dataclasses import dataclass, field
from urllib.parse import parse_qs, urlparse

import httpx

from . import grammar
from .captions import parse_caption, render_full_scene
from .census import CensusReport, census_of_scene
from .errors import (
    AuthError,
    CensusParseError,
    GrammarError,
    PreconditionViolated,
    RateLimited,
    TransportError,
)
from .qa import answer_question
from .scene import ImageArtifact, SceneDocument

ACTION_MARKER = "This Step's Action:"


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    auth_token_env_var: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    retry_backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise PreconditionViolated("timeout must be positive")
        if self.max_retries < 0:
            raise PreconditionViolated("max_retries must be >= 0")

    @property
    def is_mock(self) -> bool:
        return urlparse(self.endpoint_url).scheme == "mock"

    def mock_params(self) -> dict[str, str]:
        qs = parse_qs(urlparse(self.endpoint_url).query)
        return {k: v[-1] for k, v in qs.items()}

    def to_dict(self) -> dict:
        return {
            "endpoint_url": self.endpoint_url,
            "auth_token_env_var": self.auth_token_env_var,
            "model_name": self.model_name,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "retry_backoff": self.retry_backoff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        return cls(**{k: d[k] for k in (
            "endpoint_url", "auth_token_env_var", "model_name",
            "timeout", "max_retries", "retry_backoff") if k in d})


@dataclass(frozen=True)
class BackendProfile:
    """One named configuration of the three model roles."""

    name: str
    llm: BackendConfig
    t2i: BackendConfig
    mllm: BackendConfig


def mock_profile(name: str = "mock", t2i_fault: str | None = None) -> BackendProfile:
    t2i_url = "mock://t2i" + (f"?fault={t2i_fault}" if t2i_fault else "")
    return BackendProfile(
        name=name,
        llm=BackendConfig(endpoint_url="mock://llm"),
        t2i=BackendConfig(endpoint_url=t2i_url),
        mllm=BackendConfig(endpoint_url="mock://mllm"),
    )


def _check_down(config: BackendConfig) -> None:
    if config.mock_params().get("fault") == "down":
        raise TransportError("mock backend configured as down")


def action_text(prompt: str) -> str:
    """Strip the dual-context wrapper, keeping only the step action."""
    idx = prompt.find(ACTION_MARKER)
    return prompt[idx + len(ACTION_MARKER):].strip() if idx >= 0 else prompt.strip()


# ---------------------------------------------------------------------------
# HTTP transport
# ---------------------------------------------------------------------------

_RETRYABLE = {429, 500, 502, 503, 504}


def _auth_headers(config: BackendConfig) -> dict[str, str]:
    if not config.auth_token_env_var:
        return {}
    token = os.environ.get(config.auth_token_env_var, "")
    return {"Authorization": f"Bearer {token}"} if token else {}


def _post_json(config: BackendConfig, path: str, payload: dict) -> dict:
    url = config.endpoint_url.rstrip("/") + path
    headers = _auth_headers(config)
    last_status = None
    for attempt in range(config.max_retries + 1):
        try:
            resp = httpx.post(url, json=payload, headers=headers, timeout=config.timeout)
        except httpx.HTTPError as exc:
            if attempt >= config.max_retries:
                raise TransportError(f"request to {url} failed: {exc}") from exc
            _sleep(config, attempt)
            continue
        if resp.status_code in (401, 403):
            raise AuthError(f"{resp.status_code} from {url}")
        if resp.status_code in _RETRYABLE:
            last_status = resp.status_code
            if attempt >= config.max_retries:
                break
            _sleep(config, attempt)
            continue
        if resp.status_code >= 400:
            raise TransportError(f"{resp.status_code} from {url}: {resp.text[:200]}")
        return resp.json()
    if last_status == 429:
        raise RateLimited(f"429 from {url} after {config.max_retries} retries")
    raise TransportError(f"{last_status} from {url} after {config.max_retries} retries")


def _sleep(config: BackendConfig, attempt: int) -> None:
    delay = config.retry_backoff * (2 ** attempt) + random.uniform(0, config.retry_backoff / 4)
    time.sleep(delay)


def _decode_artifact(reply: dict) -> ImageArtifact:
    try:
        data = base64.b64decode(reply["png_base64"])
        return ImageArtifact.from_png(data, width=int(reply["width"]), height=int(reply["height"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise TransportError(f"malformed image reply: {exc}") from exc


def _encode_artifact(image: ImageArtifact) -> dict:
    return {
        "media_kind": image.media_kind,
        "data_base64": base64.b64encode(image.data).decode("ascii"),
    }


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def llm_complete(system_prompt: str, user_prompt: str, config: BackendConfig) -> str:
    if not system_prompt or not user_prompt:
        raise PreconditionViolated("prompts must be non-empty")
    if config.is_mock:
        _check_down(config)
        # Local import: the template planner is the mock LLM's "model".
        from .planner import mock_planner_reply

        return mock_planner_reply(user_prompt)
    reply = _post_json(config, "/v1/complete", {
        "model": config.model_name,
        "system": system_prompt,
        "user": user_prompt,
    })
    if "text" not in reply:
        raise TransportError("LLM reply carries no text field")
    return str(reply["text"])


def t2i_generate(prompt: str, config: BackendConfig) -> ImageArtifact:
    if not prompt:
        raise PreconditionViolated("prompt must be non-empty")
    if config.is_mock:
        _check_down(config)
        return _mock_generate(prompt, config)
    reply = _post_json(config, "/v1/generate", {"model": config.model_name, "prompt": prompt})
    return _decode_artifact(reply)


def t2i_edit(image: ImageArtifact, prompt: str, config: BackendConfig) -> ImageArtifact:
    if not prompt:
        raise PreconditionViolated("prompt must be non-empty")
    if config.is_mock:
        _check_down(config)
        scene = image.scene()
        actions = grammar.parse_actions(action_text(prompt))
        return ImageArtifact.from_scene(grammar.apply_actions(scene, actions))
    reply = _post_json(config, "/v1/edit", {
        "model": config.model_name,
        "prompt": prompt,
        "image": _encode_artifact(image),
    })
    return _decode_artifact(reply)


def mllm_answer(image: ImageArtifact, question: str, config: BackendConfig) -> str:
    if not question:
        raise PreconditionViolated("question must be non-empty")
    if config.is_mock:
        _check_down(config)
        return answer_question(image.scene(), question)
    reply = _post_json(config, "/v1/answer", {
        "model": config.model_name,
        "question": question,
        "image": _encode_artifact(image),
    })
    answer = str(reply.get("answer", "")).strip().lower()
    if answer not in ("yes", "no"):
        raise TransportError(f"evaluator returned non-binary answer {answer!r}")
    return answer


def mllm_census(image: ImageArtifact, config: BackendConfig) -> CensusReport:
    if config.is_mock:
        _check_down(config)
        return census_of_scene(image.scene())
    reply = _post_json(config, "/v1/census", {
        "model": config.model_name,
        "image": _encode_artifact(image),
    })
    if not isinstance(reply, dict):
        raise CensusParseError("census reply is not a JSON object")
    return CensusReport.from_dict(reply)


# ---------------------------------------------------------------------------
# Mock generation
# ---------------------------------------------------------------------------

def _mock_generate(prompt: str, config: BackendConfig) -> ImageArtifact:
    text = action_text(prompt)
    try:
        actions = grammar.parse_actions(text)
    except GrammarError:
        actions = None
    if actions is not None:
        scene = grammar.apply_actions(SceneDocument(), actions)
        return ImageArtifact.from_scene(scene)

    # single-pass: render a whole caption at once
    parsed = parse_caption(text)
    scene = render_full_scene(parsed)
    if config.mock_params().get("fault") == "merge" and len(scene.entities) > 1:
        scene = scene.without_entity(scene.entities[-1].id)
    return ImageArtifact.from_scene(scene)
