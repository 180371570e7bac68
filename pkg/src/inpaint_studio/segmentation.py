"""Turn user gestures into binary masks, plus the mask morphology used by inpainting.

The reference segmenter is a deterministic region grower: breadth-first flood
from the seed pixel over the set of pixels whose RGB Euclidean distance from
the *seed pixel's* color is within the configured threshold. Color distance is
measured against the seed color rather than a running region mean so results
are order-independent and bit-reproducible.

Morphology uses a Euclidean disc structuring element. Distances are taken
against in-grid pixels only: dilation can never pull mask from beyond the
border, and erosion is only eaten by background that actually exists inside
the grid. That convention keeps erode(dilate(m, r), r) a superset of m for
every mask, including masks touching the border.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    EmptyStrokes,
    MalformedBackendResponse,
    RegionTooLarge,
    SeedOutOfBounds,
    ValidationFailure,
)
from .model import BinaryMask, MaskSeed, RasterImage, SeedKind, Stroke


@dataclass(frozen=True)
class SegmenterConfig:
    """Tuning for the region-growing reference segmenter."""

    color_threshold: float = 60.0
    connectivity: int = 4
    max_region_fraction: float = 0.95

    def __post_init__(self):
        if self.color_threshold <= 0:
            raise ValidationFailure("color_threshold must be > 0")
        if self.connectivity not in (4, 8):
            raise ValidationFailure("connectivity must be 4 or 8")
        if not (0 < self.max_region_fraction <= 1):
            raise ValidationFailure("max_region_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class FeatherBand:
    """Per-pixel alpha weights in [0, 1] ramping from 0 at the mask boundary
    to 1 at depth ``radius`` inside the mask; exactly 0 outside the mask."""

    radius: int
    alpha: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.alpha, dtype=np.float64)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)


_N4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_N8 = _N4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def segment_from_point(
    image: RasterImage, seed: tuple[int, int], config: SegmenterConfig | None = None
) -> BinaryMask:
    """Flood-fill the connected component of seed-similar pixels around ``seed``.

    The mask is the connected component (under config.connectivity) of pixels
    whose RGB Euclidean distance from the seed pixel's color is within
    config.color_threshold, grown breadth-first from the seed. Raises
    RegionTooLarge when the component covers more than max_region_fraction of
    the image, which signals a degenerate or near-uniform image.
    """
    cfg = config or SegmenterConfig()
    sx, sy = int(seed[0]), int(seed[1])
    width, height = image.width, image.height
    if not (0 <= sx < width and 0 <= sy < height):
        raise SeedOutOfBounds(f"seed ({sx}, {sy}) outside {width}x{height}")

    pixels = image.pixels.astype(np.int64)
    seed_color = pixels[sy, sx]
    dist_sq = ((pixels - seed_color[None, None, :]) ** 2).sum(axis=2)
    within = dist_sq <= cfg.color_threshold * cfg.color_threshold

    neighbors = _N4 if cfg.connectivity == 4 else _N8
    visited = np.zeros((height, width), dtype=np.uint8)
    visited[sy, sx] = 1
    queue: deque[tuple[int, int]] = deque([(sx, sy)])
    while queue:
        x, y = queue.popleft()
        for dx, dy in neighbors:
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height and not visited[ny, nx] and within[ny, nx]:
                visited[ny, nx] = 1
                queue.append((nx, ny))

    area = int(visited.sum())
    if area > cfg.max_region_fraction * width * height:
        raise RegionTooLarge(
            f"flooded region covers {area}/{width * height} pixels, "
            f"above max_region_fraction={cfg.max_region_fraction}"
        )
    return BinaryMask(visited)


def segment_from_box(
    image: RasterImage, box: tuple[int, int, int, int], config: SegmenterConfig | None = None
) -> BinaryMask:
    """Flood from the box center, clipped to the box; the full box if the flood misses.

    The max_region_fraction guard is lifted for the interior flood because the
    box itself bounds the result, and a box gesture must never silently yield
    an empty mask.
    """
    cfg = config or SegmenterConfig()
    x0, y0, x1, y1 = (int(v) for v in box)
    width, height = image.width, image.height
    if x0 > x1 or y0 > y1:
        raise SeedOutOfBounds(f"box {box} is degenerate (x0 <= x1, y0 <= y1 required)")
    if not (0 <= x0 and x1 < width and 0 <= y0 and y1 < height):
        raise SeedOutOfBounds(f"box {box} outside {width}x{height}")

    center = ((x0 + x1) // 2, (y0 + y1) // 2)
    uncapped = SegmenterConfig(
        color_threshold=cfg.color_threshold,
        connectivity=cfg.connectivity,
        max_region_fraction=1.0,
    )
    flood = segment_from_point(image, center, uncapped)

    box_bits = np.zeros((height, width), dtype=np.uint8)
    box_bits[y0 : y1 + 1, x0 : x1 + 1] = 1
    clipped = flood.bits & box_bits
    if not clipped.any():
        return BinaryMask(box_bits)
    return BinaryMask(clipped)


def mask_from_strokes(
    image_dims: tuple[int, int], strokes: list[Stroke] | tuple[Stroke, ...]
) -> BinaryMask:
    """Rasterize painted strokes: every pixel within Euclidean distance
    ``stroke.radius`` of the stroke polyline is set."""
    width, height = int(image_dims[0]), int(image_dims[1])
    if not strokes:
        raise EmptyStrokes("at least one stroke is required")
    for stroke in strokes:
        for x, y in stroke.points:
            if not (0 <= x < width and 0 <= y < height):
                raise SeedOutOfBounds(f"stroke point ({x}, {y}) outside {width}x{height}")

    bits = np.zeros((height, width), dtype=np.uint8)
    for stroke in strokes:
        pts = stroke.points
        segments = (
            [(pts[0], pts[0])]
            if len(pts) == 1
            else [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
        )
        for (ax, ay), (bx, by) in segments:
            _stamp_segment(bits, ax, ay, bx, by, stroke.radius)
    return BinaryMask(bits)


def _stamp_segment(bits: np.ndarray, ax: int, ay: int, bx: int, by: int, radius: int) -> None:
    """Set every pixel within ``radius`` of segment (a, b), confined to its
    radius-inflated bounding box."""
    height, width = bits.shape
    x_lo = max(0, min(ax, bx) - radius)
    x_hi = min(width - 1, max(ax, bx) + radius)
    y_lo = max(0, min(ay, by) - radius)
    y_hi = min(height - 1, max(ay, by) + radius)
    if x_lo > x_hi or y_lo > y_hi:
        return
    ys, xs = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1]
    dx, dy = float(bx - ax), float(by - ay)
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq == 0.0:
        dist_sq = (xs - ax) ** 2 + (ys - ay) ** 2
    else:
        t = ((xs - ax) * dx + (ys - ay) * dy) / seg_len_sq
        t = np.clip(t, 0.0, 1.0)
        px = ax + t * dx
        py = ay + t * dy
        dist_sq = (xs - px) ** 2 + (ys - py) ** 2
    hit = dist_sq <= float(radius) * float(radius)
    bits[y_lo : y_hi + 1, x_lo : x_hi + 1] |= hit.astype(np.uint8)


def _distance_into_mask(bits: np.ndarray) -> np.ndarray:
    """Euclidean distance from each mask pixel to the nearest in-grid background
    pixel; 0 on background, +inf when the grid has no background at all."""
    if bits.all():
        return np.full(bits.shape, np.inf)
    return ndimage.distance_transform_edt(bits)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Morphological dilation with a Euclidean disc of the given radius."""
    if radius < 0:
        raise ValidationFailure("radius must be >= 0")
    if radius == 0 or not mask.bits.any():
        return BinaryMask(mask.bits.copy())
    dist_to_mask = ndimage.distance_transform_edt(1 - mask.bits)
    return BinaryMask((dist_to_mask <= float(radius)).astype(np.uint8))


def erode(mask: BinaryMask, radius: int) -> BinaryMask:
    """Morphological erosion with a Euclidean disc of the given radius."""
    if radius < 0:
        raise ValidationFailure("radius must be >= 0")
    if radius == 0:
        return BinaryMask(mask.bits.copy())
    depth = _distance_into_mask(mask.bits)
    return BinaryMask((depth > float(radius)).astype(np.uint8))


def feather(mask: BinaryMask, radius: int) -> FeatherBand:
    """Build the soft blend band for a mask.

    alpha(p) = clamp(depth(p) / radius, 0, 1) where depth is the Euclidean
    distance transform into the mask (0 on background), so alpha is exactly 0
    outside the mask, exactly 1 at depth >= radius, and monotone along the
    distance transform in between. radius 0 degenerates to the mask bits.
    """
    if radius < 0:
        raise ValidationFailure("radius must be >= 0")
    if radius == 0:
        return FeatherBand(radius=0, alpha=mask.bits.astype(np.float64))
    depth = _distance_into_mask(mask.bits)
    alpha = np.clip(depth / float(radius), 0.0, 1.0)
    return FeatherBand(radius=radius, alpha=alpha)


# ---------------------------------------------------------------------------
# External segmenter adapter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HttpEndpoint:
    """Where a remote backend lives and how long to wait for it."""

    url: str
    timeout_s: float = 120.0
    headers: dict = field(default_factory=dict)


def external_segmenter_adapter(
    image: RasterImage, seed: MaskSeed, endpoint: HttpEndpoint
) -> BinaryMask:
    """POST the image and gesture to a remote segmentation service.

    Wire format: JSON {image: base64 PNG, seed: {kind, point|box|strokes}} in,
    JSON {mask: base64 single-channel PNG with values in {0, 255}} out. The
    returned mask must match the image dimensions exactly.
    """
    import requests

    from . import pngio

    seed.validate_for(image.width, image.height)
    body = {"image": pngio.image_to_b64(image), "seed": seed.to_dict()}
    try:
        response = requests.post(
            endpoint.url, json=body, timeout=endpoint.timeout_s, headers=endpoint.headers
        )
    except requests.RequestException as exc:
        raise BackendUnavailable(f"segmenter at {endpoint.url}: {exc}") from exc
    if response.status_code != 200:
        raise BackendUnavailable(
            f"segmenter at {endpoint.url} returned HTTP {response.status_code}"
        )
    try:
        payload = response.json()
        mask = pngio.mask_from_b64(payload["mask"])
    except (ValueError, KeyError, TypeError, ValidationFailure) as exc:
        raise MalformedBackendResponse(f"segmenter response: {exc}") from exc
    if mask.size != image.size:
        raise DimensionMismatch(
            f"segmenter returned {mask.width}x{mask.height} for a "
            f"{image.width}x{image.height} image"
        )
    return mask


def segment_with_seed(
    image: RasterImage, seed: MaskSeed, config: SegmenterConfig | None = None
) -> BinaryMask:
    """Route a gesture to the matching reference operation."""
    seed.validate_for(image.width, image.height)
    if seed.kind == SeedKind.POINT:
        return segment_from_point(image, seed.point, config)
    if seed.kind == SeedKind.BOX:
        return segment_from_box(image, seed.box, config)
    return mask_from_strokes(image.size, seed.strokes)
