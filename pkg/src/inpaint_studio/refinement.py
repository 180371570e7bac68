"""Produce a refined, object-focused prompt for the masked region.

The template refiner is the deterministic fallback; the LLM adapter wraps a
chat-completion-style HTTP service. The instruction template sent to the LLM
is fixed and versioned so every session's refinement is reproducible.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

from .errors import BackendUnavailable, EmptyRefinement, MalformedBackendResponse, ValidationFailure
from .segmentation import HttpEndpoint

MAX_PROMPT_CHARS = 400

INSTRUCTION_VERSION = "v1"

SYSTEM_INSTRUCTION = (
    "Rewrite the target-object description as a vivid, self-contained "
    "image-generation prompt for the masked region of an image. Reply with "
    "the prompt text only, on a single line."
)

_ARTICLES = ("a", "an", "the")

_CONTROL_RE = re.compile(r"[\x00-\x1f\x7f]+")


@dataclass(frozen=True)
class RefinementRequest:
    initial_prompt: str
    target_description: str
    style_hint: str | None = None

    def __post_init__(self):
        if not self.initial_prompt.strip():
            raise ValidationFailure("initial_prompt must be non-empty")
        if not self.target_description.strip():
            raise ValidationFailure("target_description must be non-empty")


def _strip_articles(text: str) -> str:
    words = text.strip().split()
    while words and words[0].lower() in _ARTICLES:
        words = words[1:]
    return " ".join(words) if words else text.strip()


def _sanitize(text: str) -> str:
    """Collapse control characters and newlines to spaces and enforce the
    length bound; refined prompts are always a single clean line."""
    cleaned = _CONTROL_RE.sub(" ", text)
    cleaned = " ".join(cleaned.split())
    return cleaned[:MAX_PROMPT_CHARS]


def refine_template(request: RefinementRequest) -> str:
    """Deterministic template refinement of the target description."""
    concept = _strip_articles(request.target_description)
    if request.style_hint and request.style_hint.strip():
        text = (
            f"An imaginative illustration of {concept}, {request.style_hint.strip()}, "
            "emphasizing its distinctive appearance"
        )
    else:
        text = f"An imaginative illustration of {concept}, emphasizing its distinctive appearance"
    return _sanitize(text)


def _user_message(request: RefinementRequest) -> str:
    parts = [
        f"Target object to render: {request.target_description}",
        f"Context (the full scene prompt): {request.initial_prompt}",
    ]
    if request.style_hint and request.style_hint.strip():
        parts.append(f"Style hint: {request.style_hint.strip()}")
    return "\n".join(parts)


def refine_llm(
    request: RefinementRequest, endpoint: HttpEndpoint, *, max_tokens: int = 256
) -> str:
    """Ask a chat-completion-style HTTP service for a refined prompt.

    Wire format: POST JSON {system, user, max_tokens} -> {text}. Returns the
    first non-empty line of the response, trimmed and truncated to the length
    bound. Raises EmptyRefinement on a blank response so callers can fall back
    to refine_template.
    """
    import requests

    body = {
        "system": SYSTEM_INSTRUCTION,
        "user": _user_message(request),
        "max_tokens": max_tokens,
    }
    headers = dict(endpoint.headers)
    api_key_env = headers.pop("x-api-key-env", None)
    if api_key_env:
        key = os.environ.get(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    try:
        response = requests.post(
            endpoint.url, json=body, timeout=endpoint.timeout_s, headers=headers
        )
    except requests.RequestException as exc:
        raise BackendUnavailable(f"refiner at {endpoint.url}: {exc}") from exc
    if response.status_code != 200:
        raise BackendUnavailable(
            f"refiner at {endpoint.url} returned HTTP {response.status_code}"
        )
    try:
        text = response.json()["text"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedBackendResponse(f"refiner response: {exc}") from exc
    if not isinstance(text, str):
        raise MalformedBackendResponse("refiner response 'text' must be a string")
    for line in text.splitlines() or [text]:
        candidate = _sanitize(line)
        if candidate:
            return candidate
    raise EmptyRefinement("refiner returned a blank suggestion")
