"""Batch driver and utilities: run scenario files end to end and emit
comparison reports; preview masks; serve the HTTP API.

Exit codes are a stable contract: 0 success, 1 usage error, 2 scenario or
validation failure, 3 backend failure.
"""

from __future__ import annotations

import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click

from .config import PipelineConfig, apply_backend_overrides, load_config
from .errors import (
    BackendUnavailable,
    MalformedBackendResponse,
    StageError,
    StudioError,
)
from .model import Stroke
from .orchestrator import Orchestrator, Scenario, load_scenario
from .segmentation import SegmenterConfig, mask_from_strokes, segment_from_box, segment_from_point
from . import pngio

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_BACKEND = 3

REPORT_COLUMNS = (
    "scenario",
    "prompt",
    "initial_score",
    "inpainted_score",
    "delta",
    "generation_backend",
    "inpaint_backend",
    "segmenter_backend",
    "refiner_backend",
    "embedder_backend",
    "config_hash",
)


@dataclass
class ReportRow:
    scenario: str
    prompt: str
    initial_score: float
    inpainted_score: float
    delta: float
    generation_backend: str
    inpaint_backend: str
    segmenter_backend: str
    refiner_backend: str
    embedder_backend: str
    config_hash: str

    def as_csv(self) -> list[str]:
        return [
            self.scenario,
            self.prompt,
            repr(self.initial_score),
            repr(self.inpainted_score),
            repr(self.delta),
            self.generation_backend,
            self.inpaint_backend,
            self.segmenter_backend,
            self.refiner_backend,
            self.embedder_backend,
            self.config_hash,
        ]


@click.group()
def cli():
    """Human-in-the-loop image correction studio."""


def _backend_options(fn):
    options = [
        click.option("--backend.generation", "backend_generation", default=None, help="procedural | http:<url>"),
        click.option("--backend.inpaint", "backend_inpaint", default=None, help="procedural | http:<url>"),
        click.option("--backend.segmenter", "backend_segmenter", default=None, help="region | http:<url>"),
        click.option("--backend.refiner", "backend_refiner", default=None, help="template | llm"),
        click.option("--backend.embedder", "backend_embedder", default=None, help="stub | http:<url>"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(
    config_path: Path | None,
    artifact_root: Path | None,
    backend_generation: str | None,
    backend_inpaint: str | None,
    backend_segmenter: str | None,
    backend_refiner: str | None,
    backend_embedder: str | None,
) -> PipelineConfig:
    cfg = load_config(config_path)
    overrides = {}
    if backend_generation:
        overrides["generation"] = backend_generation
    if backend_inpaint:
        overrides["inpaint"] = backend_inpaint
    if backend_segmenter:
        overrides["segmenter"] = backend_segmenter
    if backend_refiner:
        overrides["refiner"] = backend_refiner
    if backend_embedder:
        overrides["embedder"] = backend_embedder
    cfg = apply_backend_overrides(cfg, overrides)
    if artifact_root is not None:
        from dataclasses import replace

        cfg = replace(cfg, artifact_root=Path(artifact_root))
    return cfg


@cli.command()
@click.argument("scenario_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("report.csv"), show_default=True)
@click.option("--artifact-root", type=click.Path(path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@_backend_options
@click.option("--jobs", type=int, default=1, show_default=True, help="Concurrent scenarios")
@click.option("--seed", type=int, default=None, help="Override the seed of every scenario")
def run(
    scenario_path: Path,
    out: Path,
    artifact_root: Path | None,
    config_path: Path | None,
    backend_generation: str | None,
    backend_inpaint: str | None,
    backend_segmenter: str | None,
    backend_refiner: str | None,
    backend_embedder: str | None,
    jobs: int,
    seed: int | None,
):
    """Run one scenario file, or every *.json scenario in a directory."""
    cfg = _build_config(
        config_path,
        artifact_root,
        backend_generation,
        backend_inpaint,
        backend_segmenter,
        backend_refiner,
        backend_embedder,
    )
    if scenario_path.is_dir():
        files = sorted(scenario_path.glob("*.json"))
    else:
        files = [scenario_path]

    scenarios = [load_scenario(path) for path in files]
    if seed is not None:
        from dataclasses import replace

        scenarios = [replace(s, seed=seed) for s in scenarios]

    orchestrator = Orchestrator(cfg)

    def execute(scenario: Scenario) -> ReportRow:
        report = orchestrator.run_scenario(scenario)
        effective = apply_backend_overrides(cfg, scenario.backends)
        return ReportRow(
            scenario=scenario.name,
            prompt=report.prompt_used,
            initial_score=report.initial_score,
            inpainted_score=report.inpainted_score,
            delta=report.delta,
            generation_backend=effective.generation_backend,
            inpaint_backend=effective.inpaint_backend,
            segmenter_backend=effective.segmenter,
            refiner_backend=effective.refiner,
            embedder_backend=effective.embedder,
            config_hash=effective.hash(),
        )

    if scenarios and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(execute, scenarios))  # input order preserved
    else:
        rows = [execute(s) for s in scenarios]

    _write_report(out, rows)
    _echo_table(rows)
    click.echo(f"wrote {len(rows)} row(s) to {out}")


def _write_report(out: Path, rows: list[ReportRow]) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def _echo_table(rows: list[ReportRow]) -> None:
    if not rows:
        click.echo("(no scenarios)")
        return
    name_width = max(len(r.scenario) for r in rows)
    click.echo(f"{'scenario':<{name_width}}  {'initial':>9}  {'inpainted':>9}  {'delta':>9}")
    for row in rows:
        click.echo(
            f"{row.scenario:<{name_width}}  {row.initial_score:>9.3f}  "
            f"{row.inpainted_score:>9.3f}  {row.delta:>+9.3f}"
        )


def _parse_coords(text: str, count: int, flag: str) -> list[int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != count:
        raise click.UsageError(f"--{flag} expects {count} integers, got {text!r}")
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise click.UsageError(f"--{flag}: {exc}") from exc


@cli.command("mask")
@click.argument("image_path", type=click.Path(exists=True, path_type=Path))
@click.option("--point", default=None, help='Seed point "x,y"')
@click.option("--box", default=None, help='Seed box "x0,y0,x1,y1"')
@click.option(
    "--stroke",
    "strokes",
    multiple=True,
    help='Polyline "x1,y1 x2,y2 ..." (repeatable)',
)
@click.option("--radius", type=int, default=4, show_default=True, help="Stroke brush radius")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Mask PNG path")
@click.option("--threshold", type=float, default=60.0, show_default=True)
@click.option("--connectivity", type=click.Choice(["4", "8"]), default="4", show_default=True)
@click.option("--max-region-fraction", type=float, default=0.95, show_default=True)
def mask_preview(
    image_path: Path,
    point: str | None,
    box: str | None,
    strokes: tuple[str, ...],
    radius: int,
    out: Path | None,
    threshold: float,
    connectivity: str,
    max_region_fraction: float,
):
    """Preview the mask a seed gesture would produce; prints area and bbox stats."""
    chosen = [flag for flag, value in (("point", point), ("box", box), ("stroke", strokes)) if value]
    if len(chosen) != 1:
        raise click.UsageError("exactly one of --point, --box, or --stroke is required")

    image = pngio.image_from_png_bytes(image_path.read_bytes())
    config = SegmenterConfig(
        color_threshold=threshold,
        connectivity=int(connectivity),
        max_region_fraction=max_region_fraction,
    )
    if point is not None:
        x, y = _parse_coords(point, 2, "point")
        mask = segment_from_point(image, (x, y), config)
    elif box is not None:
        x0, y0, x1, y1 = _parse_coords(box, 4, "box")
        mask = segment_from_box(image, (x0, y0, x1, y1), config)
    else:
        stroke_objs = []
        for spec_text in strokes:
            pairs = [p for p in spec_text.split() if p]
            points = []
            for pair in pairs:
                x, y = _parse_coords(pair, 2, "stroke")
                points.append((x, y))
            stroke_objs.append(Stroke(points=tuple(points), radius=radius))
        mask = mask_from_strokes(image.size, stroke_objs)

    out_path = out if out is not None else image_path.with_suffix(".mask.png")
    out_path.write_bytes(pngio.mask_to_png_bytes(mask))

    total = mask.width * mask.height
    area = mask.area()
    click.echo(f"mask written to {out_path}")
    click.echo(f"area fraction: {area / total:.4f} ({area}/{total} px)")
    ys, xs = mask.bits.nonzero()
    if area:
        click.echo(
            f"bbox: ({int(xs.min())}, {int(ys.min())}) .. ({int(xs.max())}, {int(ys.max())})"
        )
    else:
        click.echo("bbox: empty")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Defaults to $PORT or 8000")
@click.option("--artifact-root", type=click.Path(path_type=Path), default=None)
def serve(config_path: Path | None, host: str, port: int | None, artifact_root: Path | None):
    """Run the HTTP service."""
    import os

    import uvicorn

    from .service import create_app

    cfg = load_config(config_path)
    if artifact_root is not None:
        from dataclasses import replace

        cfg = replace(cfg, artifact_root=Path(artifact_root))
    effective_port = port if port is not None else int(os.environ.get("PORT", "8000"))
    uvicorn.run(create_app(cfg), host=host, port=effective_port)


def classify_error(exc: StudioError) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (BackendUnavailable, MalformedBackendResponse)):
        return EXIT_BACKEND
    return EXIT_SCENARIO


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except StudioError as exc:
        click.echo(f"error: {exc}", err=True)
        return classify_error(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
