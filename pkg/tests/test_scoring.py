from __future__ import annotations

import numpy as np
import pytest

from inpaint_studio.errors import DimensionMismatch, ValidationFailure
from inpaint_studio.generation import PaletteEntry, PaletteMap
from inpaint_studio.model import RasterImage
from inpaint_studio.scoring import Embedding, PaletteStubEmbedder, compare, similarity_score, stub_embedder

import oracles
from conftest import uniform_image


def unit(values) -> Embedding:
    return Embedding.from_raw(np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------------------
# similarity_score
# ---------------------------------------------------------------------------


def test_identical_embeddings_score_100():
    e = unit([0.3, 0.4, 0.5])
    assert similarity_score(e, e) == pytest.approx(100.0)


def test_orthogonal_embeddings_score_0():
    assert similarity_score(unit([1.0, 0.0]), unit([0.0, 1.0])) == 0.0


def test_antiparallel_embeddings_clamp_to_0():
    assert similarity_score(unit([1.0, 0.0]), unit([-1.0, 0.0])) == 0.0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        similarity_score(unit([1.0, 0.0]), unit([1.0, 0.0, 0.0]))


def test_score_is_symmetric_and_bounded():
    rng = np.random.default_rng(3)
    for trial in range(50):
        dim = int(rng.integers(2, 40))
        a = unit(rng.normal(size=dim))
        b = unit(rng.normal(size=dim))
        ab = similarity_score(a, b)
        assert ab == similarity_score(b, a)
        assert 0.0 <= ab <= 100.0


def test_score_matches_naive_cosine_oracle():
    rng = np.random.default_rng(11)
    for trial in range(200):
        dim = int(rng.integers(2, 513))
        a = unit(rng.normal(size=dim))
        b = unit(rng.normal(size=dim))
        expected = 100.0 * max(0.0, oracles.naive_cosine(a.vector, b.vector))
        assert similarity_score(a, b) == pytest.approx(expected, abs=1e-9)


def test_score_invariant_under_positive_rescaling():
    rng = np.random.default_rng(21)
    for trial in range(20):
        raw_a = rng.normal(size=8)
        raw_b = rng.normal(size=8)
        scale_a = float(rng.uniform(0.01, 100.0))
        scale_b = float(rng.uniform(0.01, 100.0))
        base = similarity_score(Embedding.from_raw(raw_a), Embedding.from_raw(raw_b))
        scaled = similarity_score(
            Embedding.from_raw(raw_a * scale_a), Embedding.from_raw(raw_b * scale_b)
        )
        assert scaled == pytest.approx(base, abs=1e-9)


def test_embedding_norm_invariant_enforced():
    with pytest.raises(ValidationFailure):
        Embedding(np.array([1.0, 1.0]))
    with pytest.raises(ValidationFailure):
        Embedding.from_raw(np.zeros(4))
    assert Embedding.from_raw([3.0, 4.0]).dim == 2


# ---------------------------------------------------------------------------
# stub embedder
# ---------------------------------------------------------------------------

TWO_COLOR_PALETTE = PaletteMap(
    entries=(PaletteEntry("blue", (40, 80, 220)), PaletteEntry("red", (200, 40, 40)))
)


def test_stub_embedder_is_deterministic():
    embedder = stub_embedder()
    a = embedder.embed_text("blue bananas on the table")
    b = embedder.embed_text("blue bananas on the table")
    assert np.array_equal(a.vector, b.vector)


def test_text_without_keywords_is_bias_axis():
    embedder = PaletteStubEmbedder(TWO_COLOR_PALETTE)
    emb = embedder.embed_text("nothing known here")
    assert emb.vector[-1] == pytest.approx(1.0)
    assert np.linalg.norm(emb.vector) == pytest.approx(1.0)
    assert (emb.vector[:-1] == 0).all()


def test_blue_image_against_blue_text_matches_hand_cosine():
    embedder = PaletteStubEmbedder(TWO_COLOR_PALETTE)
    image = uniform_image(16, 16, color=(40, 80, 220))
    text = embedder.embed_text("blue bananas")
    score = similarity_score(embedder.embed_image(image), text)
    # hand evaluation: image vec = (1, 0, 1)/sqrt(2); text vec = (1, 0, 1)/sqrt(2)
    assert score == pytest.approx(100.0, abs=1e-9)


def test_half_blue_image_sparse_cosine_by_hand():
    embedder = PaletteStubEmbedder(TWO_COLOR_PALETTE)
    arr = np.zeros((16, 16, 3), dtype=np.uint8)
    arr[:, :8] = (40, 80, 220)
    arr[:, 8:] = (200, 40, 40)
    image = RasterImage(arr)
    emb = embedder.embed_image(image)
    # fractions: blue 0.5, red 0.5, bias 1 -> normalized
    expected = np.array([0.5, 0.5, 1.0])
    expected = expected / np.linalg.norm(expected)
    assert np.allclose(emb.vector, expected, atol=1e-12)
    text = embedder.embed_text("blue bananas")  # (1, 0, 1)/sqrt(2)
    score = similarity_score(emb, text)
    hand = 100.0 * oracles.naive_cosine(expected, [1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)])
    assert score == pytest.approx(hand, abs=1e-9)


def test_image_fractions_match_exhaustive_oracle():
    embedder = PaletteStubEmbedder(TWO_COLOR_PALETTE, match_radius=80.0)
    rng = np.random.default_rng(9)
    image = RasterImage(rng.integers(0, 256, (12, 12, 3), dtype=np.uint8).astype(np.uint8))
    emb = embedder.embed_image(image)
    raw = [
        oracles.match_fraction(image.pixels, entry.color, 80.0)
        for entry in TWO_COLOR_PALETTE.entries
    ] + [1.0]
    expected = np.asarray(raw) / np.linalg.norm(raw)
    assert np.allclose(emb.vector, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def test_compare_identical_images_has_delta_exactly_zero():
    embedder = stub_embedder()
    image = uniform_image(24, 24, color=(40, 80, 220))
    report = compare(image, image, "blue bananas", embedder)
    assert report.delta == 0.0
    assert report.embedder_id == "stub"
    assert report.prompt_used == "blue bananas"


def test_compare_constructed_positive_delta_matches_hand_value():
    """Flat-color construction: the inpainted image swaps a quarter of the
    frame to the palette keyword the prompt asks for; expected scores are
    hand-evaluated from the sparse vectors."""
    embedder = PaletteStubEmbedder(TWO_COLOR_PALETTE)
    initial = uniform_image(16, 16, color=(200, 40, 40))  # all red
    fixed = np.array(initial.pixels)
    fixed[:, :4] = (40, 80, 220)  # left quarter turned blue
    inpainted = RasterImage(fixed)

    report = compare(initial, inpainted, "blue bananas", embedder)

    # text "blue bananas" -> (blue 1, red 0, bias 1)
    text = [1.0, 0.0, 1.0]
    initial_vec = [0.0, 1.0, 1.0]  # all red
    inpainted_vec = [0.25, 0.75, 1.0]
    expected_initial = 100.0 * max(0.0, oracles.naive_cosine(initial_vec, text))
    expected_inpainted = 100.0 * max(0.0, oracles.naive_cosine(inpainted_vec, text))
    assert report.initial_score == pytest.approx(expected_initial, abs=1e-6)
    assert report.inpainted_score == pytest.approx(expected_inpainted, abs=1e-6)
    assert report.delta > 0
    assert report.delta == pytest.approx(expected_inpainted - expected_initial, abs=1e-6)
