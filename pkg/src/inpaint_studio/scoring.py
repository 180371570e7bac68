"""Text-image similarity scoring over a pluggable embedder.

The score is 100 * max(0, cosine) between unit-norm embeddings, which matches
the magnitude of published CLIP-style comparisons. Scores are only comparable
within one embedder, so every report records the embedder id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import BackendUnavailable, DimensionMismatch, MalformedBackendResponse, ValidationFailure
from .generation import DEFAULT_PALETTE, PaletteMap
from .model import RasterImage, ScoreReport
from .segmentation import HttpEndpoint

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Embedding:
    """Fixed-length unit-norm vector; embedders must normalize."""

    vector: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.vector, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise ValidationFailure("embedding must be a 1-D vector of length >= 2")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValidationFailure(f"embedding norm {norm} is not 1 within {NORM_TOLERANCE}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "vector", arr)

    @classmethod
    def from_raw(cls, vector) -> "Embedding":
        arr = np.asarray(vector, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValidationFailure("cannot normalize a zero embedding")
        return cls(arr / norm)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@runtime_checkable
class EmbedderBackend(Protocol):
    id: str

    def embed_text(self, text: str) -> Embedding: ...

    def embed_image(self, image: RasterImage) -> Embedding: ...


def similarity_score(image_emb: Embedding, text_emb: Embedding) -> float:
    """100 * max(0, cosine similarity); symmetric, bounded in [0, 100].

    Inputs are unit-norm by construction, but the division re-normalizes
    defensively so the score is invariant under positive rescaling.
    """
    if image_emb.dim != text_emb.dim:
        raise DimensionMismatch(
            f"embedding dims differ: {image_emb.dim} vs {text_emb.dim}"
        )
    a, b = image_emb.vector, text_emb.vector
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    cosine = float(np.dot(a, b)) / denom
    return 100.0 * max(0.0, cosine)


def compare(
    initial: RasterImage,
    inpainted: RasterImage,
    prompt: str,
    embedder: EmbedderBackend,
) -> ScoreReport:
    """Score both images against the prompt and report the delta."""
    text_emb = embedder.embed_text(prompt)
    initial_score = similarity_score(embedder.embed_image(initial), text_emb)
    inpainted_score = similarity_score(embedder.embed_image(inpainted), text_emb)
    return ScoreReport.build(
        prompt_used=prompt,
        initial_score=initial_score,
        inpainted_score=inpainted_score,
        embedder_id=embedder.id,
    )


class PaletteStubEmbedder:
    """Deterministic test embedder over the palette keyword list plus a bias axis.

    Text maps to the indicator vector of palette keywords present (whole-word,
    lowercased); an image maps to the per-keyword fraction of pixels within
    ``match_radius`` of the keyword's color. Both get a constant 1.0 bias
    coordinate before normalization, so no input embeds to the zero vector.
    """

    def __init__(self, palette: PaletteMap = DEFAULT_PALETTE, match_radius: float = 80.0):
        self.palette = palette
        self.match_radius = float(match_radius)
        self.id = "stub"

    @property
    def dim(self) -> int:
        return len(self.palette.entries) + 1

    def embed_text(self, text: str) -> Embedding:
        present = set(self.palette.keywords_in(text))
        raw = np.zeros(self.dim, dtype=np.float64)
        for i, entry in enumerate(self.palette.entries):
            if entry.keyword in present:
                raw[i] = 1.0
        raw[-1] = 1.0
        return Embedding.from_raw(raw)

    def embed_image(self, image: RasterImage) -> Embedding:
        pixels = image.pixels.reshape(-1, 3).astype(np.float64)
        total = pixels.shape[0]
        raw = np.zeros(self.dim, dtype=np.float64)
        radius_sq = self.match_radius * self.match_radius
        for i, entry in enumerate(self.palette.entries):
            color = np.array(entry.color, dtype=np.float64)
            dist_sq = ((pixels - color[None, :]) ** 2).sum(axis=1)
            raw[i] = float((dist_sq <= radius_sq).sum()) / total
        raw[-1] = 1.0
        return Embedding.from_raw(raw)


def stub_embedder(palette: PaletteMap = DEFAULT_PALETTE) -> PaletteStubEmbedder:
    return PaletteStubEmbedder(palette)


class HttpEmbedder:
    """Adapter for a remote embedding service.

    Wire format: POST JSON {text} or {image: base64 PNG} -> {embedding: [...]}.
    Responses are normalized locally before use.
    """

    def __init__(self, endpoint: HttpEndpoint):
        self.endpoint = endpoint
        self.id = f"http:{endpoint.url}"

    def _post(self, body: dict) -> Embedding:
        import requests

        try:
            response = requests.post(
                self.endpoint.url,
                json=body,
                timeout=self.endpoint.timeout_s,
                headers=self.endpoint.headers,
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"embedder at {self.endpoint.url}: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"embedder at {self.endpoint.url} returned HTTP {response.status_code}"
            )
        try:
            vector = response.json()["embedding"]
            return Embedding.from_raw(np.asarray(vector, dtype=np.float64))
        except (ValueError, KeyError, TypeError, ValidationFailure) as exc:
            raise MalformedBackendResponse(f"embedder response: {exc}") from exc

    def embed_text(self, text: str) -> Embedding:
        return self._post({"text": text})

    def embed_image(self, image: RasterImage) -> Embedding:
        from . import pngio

        return self._post({"image": pngio.image_to_b64(image)})
