from __future__ import annotations

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from inpaint_studio.config import PipelineConfig
from inpaint_studio.model import RasterImage
from inpaint_studio.orchestrator import Orchestrator

SCENARIOS_DIR = Path(__file__).resolve().parent.parent / "scenarios"

SUPPLEMENTARY_CORPUS = [
    "chocolate_river",
    "broken_diamonds",
    "polka_dot_cat",
    "western_chef",
    "cookie_moon",
    "icecream_mountains",
]


@pytest.fixture
def fixed_clock():
    """Deterministic injectable clock: strictly increasing UTC timestamps."""
    state = {"now": datetime(2024, 5, 1, 12, 0, 0, tzinfo=timezone.utc)}

    def tick() -> datetime:
        state["now"] = state["now"] + timedelta(seconds=1)
        return state["now"]

    return tick


@pytest.fixture
def make_orchestrator(tmp_path):
    def factory(**config_kwargs) -> Orchestrator:
        config_kwargs.setdefault("artifact_root", tmp_path / "artifacts")
        return Orchestrator(PipelineConfig(**config_kwargs))

    return factory


def two_color_image(width: int = 16, height: int = 16) -> RasterImage:
    """Left half pure red, right half pure blue."""
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    arr[:, : width // 2] = (255, 0, 0)
    arr[:, width // 2 :] = (0, 0, 255)
    return RasterImage(arr)


def uniform_image(width: int, height: int, color=(90, 90, 90)) -> RasterImage:
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    arr[:, :] = color
    return RasterImage(arr)


def random_region_image(rng: np.random.Generator, width: int, height: int) -> RasterImage:
    """Synthetic image with two to four well-separated color regions."""
    colors = np.array(
        [(250, 40, 40), (40, 70, 240), (40, 220, 90), (245, 235, 60)], dtype=np.uint8
    )
    n_regions = int(rng.integers(2, 5))
    chosen = colors[rng.permutation(4)[:n_regions]]
    centers = rng.integers(0, [width, height], size=(n_regions, 2))
    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    dist = (
        (xs[None, :, :] - centers[:, 0, None, None]) ** 2
        + (ys[None, :, :] - centers[:, 1, None, None]) ** 2
    )
    nearest = dist.argmin(axis=0)
    return RasterImage(chosen[nearest])
