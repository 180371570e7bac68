"""HTTP backend adapters against local stub servers: happy paths, contract
violations, and failure modes."""

from __future__ import annotations

import numpy as np
import pytest

from inpaint_studio import pngio
from inpaint_studio.errors import BackendUnavailable, DimensionMismatch, MalformedBackendResponse
from inpaint_studio.generation import (
    HttpGenerationBackend,
    HttpInpaintBackend,
    GenerationRequest,
    InpaintRequest,
)
from inpaint_studio.model import BinaryMask, MaskSeed
from inpaint_studio.scoring import HttpEmbedder
from inpaint_studio.segmentation import HttpEndpoint, external_segmenter_adapter

from conftest import two_color_image, uniform_image
from stub_server import StubServer, unreachable_url


def endpoint(url: str, timeout: float = 5.0) -> HttpEndpoint:
    return HttpEndpoint(url=url, timeout_s=timeout)


# ---------------------------------------------------------------------------
# segmenter adapter
# ---------------------------------------------------------------------------


def box_echo_handler(path, body):
    """Returns the request's box as the mask, like a perfectly obedient SAM."""
    image = pngio.image_from_b64(body["image"])
    x0, y0, x1, y1 = body["seed"]["box"]
    bits = np.zeros((image.height, image.width), dtype=np.uint8)
    bits[y0 : y1 + 1, x0 : x1 + 1] = 1
    return 200, {"mask": pngio.mask_to_b64(BinaryMask(bits))}


def test_segmenter_adapter_round_trips_box():
    image = two_color_image(16, 16)
    with StubServer(box_echo_handler) as stub:
        mask = external_segmenter_adapter(
            image, MaskSeed.from_box(2, 3, 9, 11), endpoint(stub.url)
        )
    assert mask.size == image.size
    assert mask.area() == 8 * 9
    assert mask.bits[3:12, 2:10].all()


def test_segmenter_adapter_rejects_wrong_dimensions():
    def handler(path, body):
        wrong = BinaryMask.empty(4, 4)
        return 200, {"mask": pngio.mask_to_b64(wrong)}

    with StubServer(handler) as stub:
        with pytest.raises(DimensionMismatch):
            external_segmenter_adapter(
                two_color_image(16, 16), MaskSeed.from_point(1, 1), endpoint(stub.url)
            )


def test_segmenter_adapter_unreachable_endpoint():
    with pytest.raises(BackendUnavailable):
        external_segmenter_adapter(
            two_color_image(16, 16),
            MaskSeed.from_point(1, 1),
            endpoint(unreachable_url(), timeout=0.5),
        )


def test_segmenter_adapter_malformed_payload():
    with StubServer(lambda path, body: (200, {"mask": "not base64 png @@"})) as stub:
        with pytest.raises(MalformedBackendResponse):
            external_segmenter_adapter(
                two_color_image(16, 16), MaskSeed.from_point(1, 1), endpoint(stub.url)
            )


def test_segmenter_adapter_http_error_is_unavailable():
    with StubServer(lambda path, body: (500, {"oops": True})) as stub:
        with pytest.raises(BackendUnavailable):
            external_segmenter_adapter(
                two_color_image(16, 16), MaskSeed.from_point(1, 1), endpoint(stub.url)
            )


# ---------------------------------------------------------------------------
# generation adapter
# ---------------------------------------------------------------------------


def test_generation_adapter_decodes_image():
    canned = uniform_image(20, 20, color=(7, 8, 9))

    def handler(path, body):
        assert body == {"prompt": "p", "seed": 4, "width": 20, "height": 20}
        return 200, {"image": pngio.image_to_b64(canned)}

    with StubServer(handler) as stub:
        backend = HttpGenerationBackend(endpoint(stub.url))
        out = backend.generate(GenerationRequest(prompt="p", seed=4, width=20, height=20))
    assert out == canned


def test_generation_adapter_wrong_dimensions_is_malformed():
    def handler(path, body):
        return 200, {"image": pngio.image_to_b64(uniform_image(16, 16))}

    with StubServer(handler) as stub:
        backend = HttpGenerationBackend(endpoint(stub.url))
        with pytest.raises(MalformedBackendResponse):
            backend.generate(GenerationRequest(prompt="p", seed=4, width=20, height=20))


def test_generation_adapter_timeout_is_unavailable():
    import time

    def handler(path, body):
        time.sleep(1.2)
        return 200, {"image": ""}

    with StubServer(handler) as stub:
        backend = HttpGenerationBackend(endpoint(stub.url, timeout=0.2))
        with pytest.raises(BackendUnavailable):
            backend.generate(GenerationRequest(prompt="p", seed=4, width=20, height=20))


# ---------------------------------------------------------------------------
# inpaint adapter
# ---------------------------------------------------------------------------


def test_inpaint_adapter_composites_locally():
    """Solid-green backend output, half mask, feather 0: left half green,
    right half bit-identical to the original."""
    image = two_color_image(16, 16)
    bits = np.zeros((16, 16), dtype=np.uint8)
    bits[:, :8] = 1
    mask = BinaryMask(bits)
    green = uniform_image(16, 16, color=(0, 255, 0))

    with StubServer(lambda path, body: (200, {"image": pngio.image_to_b64(green)})) as stub:
        backend = HttpInpaintBackend(endpoint(stub.url))
        out = backend.inpaint(
            InpaintRequest(image=image, mask=mask, refined_prompt="p", seed=1, feather_radius=0)
        )
    assert (out.pixels[:, :8] == (0, 255, 0)).all()
    assert np.array_equal(out.pixels[:, 8:], image.pixels[:, 8:])


def test_inpaint_adapter_wrong_dimensions_is_malformed():
    with StubServer(
        lambda path, body: (200, {"image": pngio.image_to_b64(uniform_image(4, 4))})
    ) as stub:
        backend = HttpInpaintBackend(endpoint(stub.url))
        with pytest.raises(MalformedBackendResponse):
            backend.inpaint(
                InpaintRequest(
                    image=two_color_image(16, 16),
                    mask=BinaryMask.full(16, 16),
                    refined_prompt="p",
                    seed=1,
                )
            )


def test_inpaint_adapter_unreachable():
    backend = HttpInpaintBackend(endpoint(unreachable_url(), timeout=0.5))
    with pytest.raises(BackendUnavailable):
        backend.inpaint(
            InpaintRequest(
                image=two_color_image(16, 16),
                mask=BinaryMask.full(16, 16),
                refined_prompt="p",
                seed=1,
            )
        )


# ---------------------------------------------------------------------------
# embedder adapter
# ---------------------------------------------------------------------------


def test_embedder_adapter_normalizes_response():
    with StubServer(lambda path, body: (200, {"embedding": [3.0, 0.0, 4.0]})) as stub:
        embedder = HttpEmbedder(endpoint(stub.url))
        emb = embedder.embed_text("anything")
    assert emb.vector == pytest.approx([0.6, 0.0, 0.8])


def test_embedder_adapter_sends_image_payload():
    seen = {}

    def handler(path, body):
        seen.update(body)
        return 200, {"embedding": [1.0, 0.0]}

    with StubServer(handler) as stub:
        HttpEmbedder(endpoint(stub.url)).embed_image(uniform_image(16, 16))
    decoded = pngio.image_from_b64(seen["image"])
    assert decoded.size == (16, 16)


def test_embedder_adapter_malformed_response():
    with StubServer(lambda path, body: (200, {"embedding": "nope"})) as stub:
        with pytest.raises(MalformedBackendResponse):
            HttpEmbedder(endpoint(stub.url)).embed_text("x")
