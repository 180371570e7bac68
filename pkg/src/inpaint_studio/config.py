"""Pipeline configuration, backend key resolution, and config-file loading.

Backend keys:
  generation / inpaint:  "procedural" | "http:<url>"
  segmenter:             "region"     | "http:<url>"
  embedder:              "stub"       | "http:<url>"
  refiner:               "template"   | "llm"   (llm needs refiner_url)

Configuration comes from an optional JSON file plus environment overrides
(ARTIFACT_ROOT, PORT, STUDIO_* backend keys; see README).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ParseFailure, UnknownBackend, ValidationFailure
from .generation import (
    DEFAULT_FEATHER_RADIUS,
    DEFAULT_PALETTE,
    CompositingInpainter,
    HttpGenerationBackend,
    HttpInpaintBackend,
    PaletteMap,
    ProceduralGenerator,
)
from .scoring import HttpEmbedder, PaletteStubEmbedder
from .segmentation import (
    BinaryMask,
    HttpEndpoint,
    SegmenterConfig,
    external_segmenter_adapter,
    segment_with_seed,
)

_HTTP_PREFIX = "http:"


@dataclass(frozen=True)
class PipelineConfig:
    generation_backend: str = "procedural"
    inpaint_backend: str = "procedural"
    segmenter: str = "region"
    refiner: str = "template"
    embedder: str = "stub"
    feather_radius: int = DEFAULT_FEATHER_RADIUS
    segmenter_config: SegmenterConfig = field(default_factory=SegmenterConfig)
    artifact_root: Path = Path("artifacts")
    image_width: int = 128
    image_height: int = 128
    backend_timeout_s: float = 120.0
    refiner_url: str | None = None
    refiner_api_key_env: str = "INPAINT_STUDIO_LLM_API_KEY"

    def __post_init__(self):
        if self.feather_radius < 0:
            raise ValidationFailure("feather_radius must be >= 0")
        if self.image_width < 16 or self.image_height < 16:
            raise ValidationFailure("image dimensions must be >= 16")
        object.__setattr__(self, "artifact_root", Path(self.artifact_root))

    def hash(self) -> str:
        """Stable digest of the effective configuration, recorded in reports so
        numbers are never compared across incompatible setups."""
        payload = {
            "generation_backend": self.generation_backend,
            "inpaint_backend": self.inpaint_backend,
            "segmenter": self.segmenter,
            "refiner": self.refiner,
            "embedder": self.embedder,
            "feather_radius": self.feather_radius,
            "segmenter_config": {
                "color_threshold": self.segmenter_config.color_threshold,
                "connectivity": self.segmenter_config.connectivity,
                "max_region_fraction": self.segmenter_config.max_region_fraction,
            },
            "image_width": self.image_width,
            "image_height": self.image_height,
            "refiner_url": self.refiner_url,
        }
        canonical = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(canonical).hexdigest()[:16]


def _endpoint(key: str, timeout_s: float) -> HttpEndpoint:
    return HttpEndpoint(url=key[len(_HTTP_PREFIX):], timeout_s=timeout_s)


def resolve_generation_backend(config: PipelineConfig, palette: PaletteMap = DEFAULT_PALETTE):
    key = config.generation_backend
    if key == "procedural":
        return ProceduralGenerator(palette)
    if key.startswith(_HTTP_PREFIX):
        return HttpGenerationBackend(_endpoint(key, config.backend_timeout_s))
    raise UnknownBackend(key)


def resolve_inpaint_backend(config: PipelineConfig, palette: PaletteMap = DEFAULT_PALETTE):
    key = config.inpaint_backend
    if key == "procedural":
        return CompositingInpainter(palette)
    if key.startswith(_HTTP_PREFIX):
        return HttpInpaintBackend(_endpoint(key, config.backend_timeout_s))
    raise UnknownBackend(key)


class RegionSegmenter:
    """Local gesture-to-mask segmenter built on the region-growing engine."""

    def __init__(self, segmenter_config: SegmenterConfig):
        self.config = segmenter_config
        self.id = "region"

    def segment(self, image, seed) -> BinaryMask:
        return segment_with_seed(image, seed, self.config)


class HttpSegmenter:
    def __init__(self, endpoint: HttpEndpoint):
        self.endpoint = endpoint
        self.id = f"http:{endpoint.url}"

    def segment(self, image, seed) -> BinaryMask:
        return external_segmenter_adapter(image, seed, self.endpoint)


def resolve_segmenter(config: PipelineConfig):
    key = config.segmenter
    if key == "region":
        return RegionSegmenter(config.segmenter_config)
    if key.startswith(_HTTP_PREFIX):
        return HttpSegmenter(_endpoint(key, config.backend_timeout_s))
    raise UnknownBackend(key)


def resolve_embedder(config: PipelineConfig, palette: PaletteMap = DEFAULT_PALETTE):
    key = config.embedder
    if key == "stub":
        return PaletteStubEmbedder(palette)
    if key.startswith(_HTTP_PREFIX):
        return HttpEmbedder(_endpoint(key, config.backend_timeout_s))
    raise UnknownBackend(key)


def validate_refiner(config: PipelineConfig) -> None:
    if config.refiner not in ("template", "llm"):
        raise UnknownBackend(config.refiner)
    if config.refiner == "llm" and not config.refiner_url:
        raise ValidationFailure("refiner 'llm' requires refiner_url")


_FILE_FIELDS = {
    "generation_backend": str,
    "inpaint_backend": str,
    "segmenter": str,
    "refiner": str,
    "embedder": str,
    "feather_radius": int,
    "artifact_root": str,
    "image_width": int,
    "image_height": int,
    "backend_timeout_s": float,
    "refiner_url": str,
    "refiner_api_key_env": str,
}

_ENV_OVERRIDES = {
    "ARTIFACT_ROOT": "artifact_root",
    "STUDIO_GENERATION_BACKEND": "generation_backend",
    "STUDIO_INPAINT_BACKEND": "inpaint_backend",
    "STUDIO_SEGMENTER_BACKEND": "segmenter",
    "STUDIO_REFINER_BACKEND": "refiner",
    "STUDIO_REFINER_URL": "refiner_url",
    "STUDIO_EMBEDDER_BACKEND": "embedder",
    "STUDIO_FEATHER_RADIUS": "feather_radius",
}


def load_config(path: str | Path | None = None, env: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from an optional JSON file plus env overrides."""
    environ = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise ParseFailure("config", str(exc)) from exc
        if not isinstance(payload, dict):
            raise ParseFailure("config", "config file must hold a JSON object")
        seg_cfg = payload.pop("segmenter_config", None)
        for key, value in payload.items():
            if key not in _FILE_FIELDS:
                raise ParseFailure(key, "unknown configuration field")
            try:
                values[key] = _FILE_FIELDS[key](value)
            except (TypeError, ValueError) as exc:
                raise ParseFailure(key, str(exc)) from exc
        if seg_cfg is not None:
            try:
                values["segmenter_config"] = SegmenterConfig(**seg_cfg)
            except (TypeError, ValidationFailure) as exc:
                raise ParseFailure("segmenter_config", str(exc)) from exc

    for env_key, field_name in _ENV_OVERRIDES.items():
        raw = environ.get(env_key)
        if raw is None:
            continue
        caster = _FILE_FIELDS.get(field_name, str)
        try:
            values[field_name] = caster(raw)
        except (TypeError, ValueError) as exc:
            raise ParseFailure(field_name, f"bad env override {env_key}: {exc}") from exc

    if "artifact_root" in values:
        values["artifact_root"] = Path(values["artifact_root"])
    return PipelineConfig(**values)


def apply_backend_overrides(config: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Apply a scenario's per-run backend key overrides."""
    mapping = {
        "generation": "generation_backend",
        "inpaint": "inpaint_backend",
        "segmenter": "segmenter",
        "refiner": "refiner",
        "embedder": "embedder",
    }
    changes: dict = {}
    for key, value in overrides.items():
        if key not in mapping:
            raise ParseFailure(f"backends.{key}", "unknown backend slot")
        if not isinstance(value, str):
            raise ParseFailure(f"backends.{key}", "backend key must be a string")
        changes[mapping[key]] = value
    return replace(config, **changes) if changes else config
