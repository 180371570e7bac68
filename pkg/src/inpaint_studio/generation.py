"""Text-to-image and inpainting backends.

Two reference implementations live here so the whole pipeline runs offline and
bit-reproducibly:

* a procedural generator — a seeded hash-noise field tinted toward the palette
  color of the first palette keyword (in palette order) found in the prompt;
* a compositing inpainter — generates a patch from the refined prompt and
  alpha-blends it through the mask's feather band, so every pixel outside the
  mask is preserved bit-exactly.

The HTTP adapters wrap remote diffusion-style services behind the same
contracts. The inpaint adapter re-composites the remote result through the
feather band locally, so outside-mask preservation holds no matter how the
backend misbehaves.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    BackendUnavailable,
    MalformedBackendResponse,
    ValidationFailure,
)
from .model import BinaryMask, RasterImage
from .segmentation import FeatherBand, HttpEndpoint, feather

#: Weight of the palette color in the tint blend; the rest is hash noise.
TINT_WEIGHT = 0.7

MIN_DIMENSION = 16

DEFAULT_FEATHER_RADIUS = 8


# ---------------------------------------------------------------------------
# Palette
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PaletteEntry:
    keyword: str
    color: tuple[int, int, int]


@dataclass(frozen=True)
class PaletteMap:
    """Ordered keyword -> color table driving the procedural generator.

    Matching is first-match-in-palette-order on whole-word lowercase search,
    so earlier entries model the associations the generator "prefers".
    """

    entries: tuple[PaletteEntry, ...]
    default_color: tuple[int, int, int] = (128, 128, 128)

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.keyword != entry.keyword.lower():
                raise ValidationFailure(f"palette keyword '{entry.keyword}' must be lowercase")
            if entry.keyword in seen:
                raise ValidationFailure(f"duplicate palette keyword '{entry.keyword}'")
            seen.add(entry.keyword)

    @property
    def keywords(self) -> tuple[str, ...]:
        return tuple(entry.keyword for entry in self.entries)

    def match(self, prompt: str) -> PaletteEntry | None:
        """First palette entry whose keyword occurs as a whole word in the prompt."""
        lowered = prompt.lower()
        for entry in self.entries:
            if re.search(rf"\b{re.escape(entry.keyword)}\b", lowered):
                return entry
        return None

    def color_for(self, prompt: str) -> tuple[int, int, int]:
        entry = self.match(prompt)
        return entry.color if entry is not None else self.default_color

    def keywords_in(self, text: str) -> list[str]:
        lowered = text.lower()
        return [
            entry.keyword
            for entry in self.entries
            if re.search(rf"\b{re.escape(entry.keyword)}\b", lowered)
        ]


#: Common-object keywords come first so the generator reproduces the bias the
#: correction loop exists to fix: "blue bananas and red apples" tints toward
#: apples, a chocolate river tints toward a standard blue river, and so on.
#: "banana" is deliberately absent — the scarcely-represented concept.
DEFAULT_PALETTE = PaletteMap(
    entries=(
        PaletteEntry("river", (50, 90, 200)),
        PaletteEntry("moon", (228, 228, 205)),
        PaletteEntry("clouds", (240, 240, 245)),
        PaletteEntry("cloud", (240, 240, 245)),
        PaletteEntry("mountains", (125, 115, 108)),
        PaletteEntry("mountain", (125, 115, 108)),
        PaletteEntry("apples", (190, 35, 35)),
        PaletteEntry("apple", (190, 35, 35)),
        PaletteEntry("diamonds", (225, 235, 248)),
        PaletteEntry("diamond", (225, 235, 248)),
        PaletteEntry("cat", (150, 118, 88)),
        PaletteEntry("cookie", (205, 155, 85)),
        PaletteEntry("chocolate", (88, 48, 22)),
        PaletteEntry("blue", (40, 80, 220)),
        PaletteEntry("red", (200, 40, 40)),
        PaletteEntry("yellow", (250, 215, 80)),
        PaletteEntry("golden", (218, 165, 60)),
        PaletteEntry("cream", (245, 240, 218)),
        PaletteEntry("vanilla", (243, 235, 200)),
        PaletteEntry("green", (60, 170, 75)),
    ),
    default_color=(128, 128, 128),
)


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    seed: int
    width: int
    height: int

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValidationFailure("prompt must be non-empty")
        if self.width < MIN_DIMENSION or self.height < MIN_DIMENSION:
            raise ValidationFailure(f"width and height must be >= {MIN_DIMENSION}")


@dataclass(frozen=True)
class InpaintRequest:
    image: RasterImage
    mask: BinaryMask
    refined_prompt: str
    seed: int
    feather_radius: int = DEFAULT_FEATHER_RADIUS

    def __post_init__(self):
        if not self.refined_prompt.strip():
            raise ValidationFailure("refined_prompt must be non-empty")
        if self.mask.size != self.image.size:
            raise ValidationFailure(
                f"mask {self.mask.width}x{self.mask.height} does not match "
                f"image {self.image.width}x{self.image.height}"
            )
        if self.feather_radius < 0:
            raise ValidationFailure("feather_radius must be >= 0")


# ---------------------------------------------------------------------------
# Procedural reference implementations
# ---------------------------------------------------------------------------

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_MUL2 = np.uint64(0x94D049BB133111EB)

#: Noise lattice spacing in pixels; corners are hashed, pixels interpolated.
_NOISE_CELL = 8


def _splitmix64(values: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array. Bit-stable across
    platforms, unlike stateful RNG draws; wraparound is intended."""
    with np.errstate(over="ignore"):
        z = values + _SM64_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _SM64_MUL1
        z = (z ^ (z >> np.uint64(27))) * _SM64_MUL2
        return z ^ (z >> np.uint64(31))


def _seed_word(seed: int) -> np.uint64:
    """SplitMix64 of the seed in plain Python ints (mod 2**64)."""
    mask = (1 << 64) - 1
    z = (seed + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return np.uint64(z ^ (z >> 31))


def _noise_field(seed: int, width: int, height: int) -> np.ndarray:
    """Seeded hash-noise field as float RGB in [0, 255].

    Value noise: lattice corners every _NOISE_CELL pixels get hash-derived
    channel values, pixels in between are bilinearly interpolated. The spatial
    coherence matters — it makes generated images locally smooth, so the
    region-growing segmenter behaves on them the way it does on real images.
    """
    grid_w = width // _NOISE_CELL + 2
    grid_h = height // _NOISE_CELL + 2
    gys, gxs = np.mgrid[0:grid_h, 0:grid_w].astype(np.uint64)
    corner_ids = (gys << np.uint64(32)) ^ gxs
    hashed = _splitmix64(corner_ids ^ _seed_word(seed))
    corners = np.stack(
        [
            (hashed & np.uint64(0xFF)).astype(np.float64),
            ((hashed >> np.uint64(8)) & np.uint64(0xFF)).astype(np.float64),
            ((hashed >> np.uint64(16)) & np.uint64(0xFF)).astype(np.float64),
        ],
        axis=-1,
    )

    xs = np.arange(width, dtype=np.float64) / _NOISE_CELL
    ys = np.arange(height, dtype=np.float64) / _NOISE_CELL
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    tx = (xs - x0)[None, :, None]
    ty = (ys - y0)[:, None, None]
    c00 = corners[np.ix_(y0, x0)]
    c10 = corners[np.ix_(y0, x0 + 1)]
    c01 = corners[np.ix_(y0 + 1, x0)]
    c11 = corners[np.ix_(y0 + 1, x0 + 1)]
    top = (1.0 - tx) * c00 + tx * c10
    bottom = (1.0 - tx) * c01 + tx * c11
    return (1.0 - ty) * top + ty * bottom


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def generate(request: GenerationRequest, palette: PaletteMap = DEFAULT_PALETTE) -> RasterImage:
    """Deterministic procedural generation: seeded hash noise tinted toward the
    palette color of the first matching prompt keyword."""
    color = np.array(palette.color_for(request.prompt), dtype=np.float64)
    noise = _noise_field(request.seed, request.width, request.height)
    tinted = TINT_WEIGHT * color[None, None, :] + (1.0 - TINT_WEIGHT) * noise
    return RasterImage(_round_half_up(tinted))


def composite(base: RasterImage, patch: RasterImage, band: FeatherBand) -> RasterImage:
    """alpha * patch + (1 - alpha) * base, rounded half-up per channel.

    Pixels with alpha exactly 0 come out bit-identical to ``base``; alpha
    exactly 1 yields ``patch`` bit-exactly.
    """
    if patch.size != base.size:
        raise ValidationFailure("patch dimensions must match the base image")
    alpha = band.alpha[:, :, None]
    blended = alpha * patch.pixels.astype(np.float64) + (1.0 - alpha) * base.pixels.astype(
        np.float64
    )
    return RasterImage(_round_half_up(blended))


def inpaint(request: InpaintRequest, palette: PaletteMap = DEFAULT_PALETTE) -> RasterImage:
    """Reference inpainting: generate a patch from the refined prompt and blend
    it through the mask's feather band. Everything outside the mask is the
    original image, bit-exactly."""
    patch = generate(
        GenerationRequest(
            prompt=request.refined_prompt,
            seed=request.seed,
            width=request.image.width,
            height=request.image.height,
        ),
        palette,
    )
    band = feather(request.mask, request.feather_radius)
    return composite(request.image, patch, band)


# ---------------------------------------------------------------------------
# Backend objects
# ---------------------------------------------------------------------------


class ProceduralGenerator:
    """Local deterministic generation backend."""

    def __init__(self, palette: PaletteMap = DEFAULT_PALETTE):
        self.palette = palette
        self.id = "procedural"

    def generate(self, request: GenerationRequest) -> RasterImage:
        return generate(request, self.palette)


class CompositingInpainter:
    """Local deterministic inpainting backend."""

    def __init__(self, palette: PaletteMap = DEFAULT_PALETTE):
        self.palette = palette
        self.id = "procedural"

    def inpaint(self, request: InpaintRequest) -> RasterImage:
        return inpaint(request, self.palette)


class HttpGenerationBackend:
    """Adapter for a remote text-to-image service.

    Wire format: POST JSON {prompt, seed, width, height} -> {image: base64 PNG}.
    """

    def __init__(self, endpoint: HttpEndpoint):
        self.endpoint = endpoint
        self.id = f"http:{endpoint.url}"

    def generate(self, request: GenerationRequest) -> RasterImage:
        import requests

        from . import pngio

        body = {
            "prompt": request.prompt,
            "seed": request.seed,
            "width": request.width,
            "height": request.height,
        }
        try:
            response = requests.post(
                self.endpoint.url,
                json=body,
                timeout=self.endpoint.timeout_s,
                headers=self.endpoint.headers,
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"generator at {self.endpoint.url}: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"generator at {self.endpoint.url} returned HTTP {response.status_code}"
            )
        try:
            image = pngio.image_from_b64(response.json()["image"])
        except (ValueError, KeyError, TypeError, ValidationFailure) as exc:
            raise MalformedBackendResponse(f"generator response: {exc}") from exc
        if image.size != (request.width, request.height):
            raise MalformedBackendResponse(
                f"generator returned {image.width}x{image.height}, "
                f"requested {request.width}x{request.height}"
            )
        return image


class HttpInpaintBackend:
    """Adapter for a remote inpainting service.

    Wire format: POST JSON {image: base64 PNG, mask: base64 gray PNG (0/255),
    prompt, seed} -> {image: base64 PNG}. The remote result is used only inside
    the mask: it is re-composited through the feather band locally, so pixels
    outside the mask stay bit-identical regardless of what the backend returns.
    """

    def __init__(self, endpoint: HttpEndpoint):
        self.endpoint = endpoint
        self.id = f"http:{endpoint.url}"

    def inpaint(self, request: InpaintRequest) -> RasterImage:
        import requests

        from . import pngio

        body = {
            "image": pngio.image_to_b64(request.image),
            "mask": pngio.mask_to_b64(request.mask),
            "prompt": request.refined_prompt,
            "seed": request.seed,
        }
        try:
            response = requests.post(
                self.endpoint.url,
                json=body,
                timeout=self.endpoint.timeout_s,
                headers=self.endpoint.headers,
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"inpainter at {self.endpoint.url}: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"inpainter at {self.endpoint.url} returned HTTP {response.status_code}"
            )
        try:
            produced = pngio.image_from_b64(response.json()["image"])
        except (ValueError, KeyError, TypeError, ValidationFailure) as exc:
            raise MalformedBackendResponse(f"inpainter response: {exc}") from exc
        if produced.size != request.image.size:
            raise MalformedBackendResponse(
                f"inpainter returned {produced.width}x{produced.height}, "
                f"expected {request.image.width}x{request.image.height}"
            )
        return enforce_outside_preservation(request, produced)


def enforce_outside_preservation(request: InpaintRequest, produced: RasterImage) -> RasterImage:
    """Composite a backend's inpainting output through the feather band so the
    outside-mask preservation contract holds locally, whatever came back."""
    band = feather(request.mask, request.feather_radius)
    return composite(request.image, produced, band)
