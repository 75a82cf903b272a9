"""Command-line orchestration.

Subcommands: ``learn`` (supervised shared sketch on an aligned corpus),
``learn-em`` (flip, rotate, or locate variants), ``detect`` (template
matching on one image), ``render`` (bar sketch of a saved template), and
``pool-background`` (build a reference model from a background corpus).

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 degenerate input.
"""

from __future__ import annotations

import functools
import json
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import kernels
from .backgrounds import SYNTHETIC_LABEL, synthetic_backgrounds
from .config import RunConfig, load_config
from .detection import detect as run_detect
from .em import em_flip, em_locate, em_rotate
from .errors import ConfigurationError, DataError, DegenerateImageError
from .gabor import Dictionary
from .images import compute_responses, load_gray, normalize_image, resample
from .pursuit import ActivitySet, WeightedImage, shared_sketch
from .render import overlay_sketch, render_detection_sketch, render_sketch, save_png
from .stats import ReferenceModel, pool_reference
from .template_io import (
    load_template,
    save_template,
    template_to_dict,
    write_atomic_text,
)

RASTER_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm", ".jpg", ".jpeg")


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigurationError as exc:
            raise click.UsageError(str(exc)) from exc
        except DegenerateImageError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(4) from exc
        except DataError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(3) from exc

    return wrapper


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="RNG seed override.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True, help="Output directory.")(fn)
    fn = click.option("--n", "n_elements", type=click.IntRange(min=1), default=None, help="Number of template elements.")(fn)
    fn = click.option("--resize", type=float, default=None, help="Uniform training resize factor.")(fn)
    return fn


def _resolve(config_path, seed, n_elements, resize) -> RunConfig:
    cfg = load_config(config_path)
    cfg = cfg.with_overrides(seed=seed, resize=resize)
    if n_elements is not None:
        from dataclasses import replace

        cfg = replace(cfg, pursuit=replace(cfg.pursuit, n=n_elements))
    return cfg


def _list_corpus(corpus_dir: str) -> list[Path]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise click.UsageError(f"corpus directory {corpus_dir} does not exist")
    paths = sorted(
        p for p in root.iterdir() if p.suffix.lower() in RASTER_SUFFIXES
    )
    if not paths:
        raise click.UsageError(f"no raster images found in {corpus_dir}")
    return paths


def _load_corpus(paths: list[Path], cfg: RunConfig) -> list[np.ndarray]:
    images = []
    for p in paths:
        img = load_gray(p, cfg.luma)
        if cfg.resize != 1.0:
            img = resample(img, cfg.resize)
        images.append(img)
    return images


def _reference(cfg: RunConfig, dictionary: Dictionary, background, reference_file):
    """Reference model from a pooled file, a background directory, or the
    bundled synthetic fallback."""
    m = cfg.model
    if reference_file:
        data = json.loads(Path(reference_file).read_text())
        return ReferenceModel.from_dict(data["reference"]), f"file:{reference_file}"
    if background:
        paths = _list_corpus(background)
        imgs = [normalize_image(load_gray(p, cfg.luma), dictionary) for p in paths]
        ref = pool_reference(imgs, dictionary, m.xi, m.bins, m.lambda_max, m.lambda_steps)
        return ref, f"dir:{background}"
    imgs = [normalize_image(im, dictionary) for im in synthetic_backgrounds()]
    ref = pool_reference(imgs, dictionary, m.xi, m.bins, m.lambda_max, m.lambda_steps)
    return ref, SYNTHETIC_LABEL


def _provenance(cfg: RunConfig, corpus: list[Path], ref_source: str) -> dict:
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "corpus": [p.name for p in corpus],
        "reference_source": ref_source,
        "seed": cfg.seed,
        "kernel_backend": kernels.BACKEND,
    }


def _emit_warnings(caught) -> None:
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)


@click.group()
def cli() -> None:
    """Deformable wavelet-template learning and detection."""


@cli.command()
@click.argument("corpus_dir", type=click.Path(file_okay=False))
@click.option("--background", type=click.Path(file_okay=False), help="Background image directory for the reference model.")
@click.option("--reference", "reference_file", type=click.Path(dir_okay=False), help="Pooled reference model JSON (from pool-background).")
@common_options
@_guard
def learn(corpus_dir, background, reference_file, config_path, seed, out_dir, n_elements, resize):
    """Supervised template learning on an aligned corpus."""
    cfg = _resolve(config_path, seed, n_elements, resize)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = Dictionary(cfg.gabor)
    act = ActivitySet(cfg.pursuit.b1, cfg.pursuit.b2)
    paths = _list_corpus(corpus_dir)
    ref, ref_source = _reference(cfg, dictionary, background, reference_file)

    weighted = []
    kept_paths = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for p, img in zip(paths, _load_corpus(paths, cfg)):
            try:
                normalized = normalize_image(img, dictionary)
            except DegenerateImageError as exc:
                click.echo(f"warning: {p.name} skipped: {exc}", err=True)
                continue
            weighted.append(
                WeightedImage(compute_responses(normalized, dictionary), 1.0, p.name)
            )
            kept_paths.append(p)
        if not weighted:
            raise DegenerateImageError("every corpus image was degenerate")
        template, deformed, scores = shared_sketch(
            weighted,
            dictionary,
            act,
            ref,
            cfg.pursuit.n,
            eps=cfg.pursuit.epsilon,
            inhibition=cfg.pursuit.inhibition,
        )
    _emit_warnings(caught)

    provenance = _provenance(cfg, kept_paths, ref_source)
    save_template(template, out / "template.json", provenance)
    save_png(render_sketch(template), out / "sketch_template.png")
    for i in range(1, template.n + 1):
        save_png(render_sketch(template, n=i), out / f"sketch_step_{i:03d}.png")
    lines = []
    for k, (dt, score) in enumerate(zip(deformed, scores)):
        save_png(
            render_sketch(template, deformed=dt), out / f"sketch_image_{k:03d}.png"
        )
        lines.append(json.dumps({"image": dt.image_id, "score": score}, sort_keys=True))
    write_atomic_text(out / "report.jsonl", "\n".join(lines) + "\n")
    click.echo(
        f"learned {template.n} elements from {len(weighted)} images -> {out / 'template.json'}"
    )


@cli.command("learn-em")
@click.argument("corpus_dir", type=click.Path(file_okay=False))
@click.option("--mode", type=click.Choice(["flip", "rotate", "locate"]), required=True)
@click.option("--background", type=click.Path(file_okay=False))
@click.option("--reference", "reference_file", type=click.Path(dir_okay=False))
@click.option("--iters", type=click.IntRange(min=1), default=None, help="EM iteration count override.")
@click.option("--template-size", "template_size", default=None, help="locate mode lattice as WIDTHxHEIGHT.")
@common_options
@_guard
def learn_em(corpus_dir, mode, background, reference_file, iters, template_size,
             config_path, seed, out_dir, n_elements, resize):
    """Weakly supervised learning: flip, rotate, or locate latent variants."""
    cfg = _resolve(config_path, seed, n_elements, resize)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = Dictionary(cfg.gabor)
    act = ActivitySet(cfg.pursuit.b1, cfg.pursuit.b2)
    paths = _list_corpus(corpus_dir)
    images = _load_corpus(paths, cfg)
    ref, ref_source = _reference(cfg, dictionary, background, reference_file)
    n = cfg.pursuit.n

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if mode == "flip":
            template, state, deformed, report = em_flip(
                images, dictionary, act, ref, n,
                iters=iters or cfg.em.iters_flip, seed=cfg.seed,
                eps=cfg.pursuit.epsilon, inhibition=cfg.pursuit.inhibition,
            )
            summary = {"rho": state.rho, "assignments": state.assignments.tolist()}
        elif mode == "rotate":
            template, state, deformed, report = em_rotate(
                images, dictionary, act, ref, n,
                rotations=list(cfg.em.rotations),
                iters=iters or cfg.em.iters_rotate, seed=cfg.seed,
                eps=cfg.pursuit.epsilon,
            )
            summary = {
                "priors": state.priors.tolist(),
                "assignments": state.assignments.tolist(),
            }
        else:
            if template_size:
                try:
                    w_str, h_str = template_size.lower().split("x")
                    shape = (int(h_str), int(w_str))
                except ValueError as exc:
                    raise click.UsageError(
                        "--template-size must look like 120x100"
                    ) from exc
            elif cfg.em.template_width and cfg.em.template_height:
                shape = (cfg.em.template_height, cfg.em.template_width)
            else:
                raise click.UsageError("locate mode needs --template-size")
            template, state, deformed, report = em_locate(
                images, dictionary, act, ref, n,
                factors=list(cfg.detect.factors),
                iters=iters or cfg.em.iters_locate,
                template_shape=shape, allow_flip=cfg.em.allow_flip,
                eps=cfg.pursuit.epsilon,
            )
            summary = {
                "rows": state.rows.tolist(),
                "cols": state.cols.tolist(),
                "factors": state.factors.tolist(),
                "scores": state.scores.tolist(),
            }
    _emit_warnings(caught)

    provenance = _provenance(cfg, paths, ref_source)
    provenance["em_mode"] = mode
    save_template(template, out / "template.json", provenance)
    save_png(render_sketch(template), out / "sketch_template.png")
    lines = []
    for entry in report:
        snapshot = entry.pop("template_snapshot", None)
        if snapshot is not None:
            save_png(
                render_sketch(snapshot),
                out / f"sketch_iter_{entry['iteration']:02d}.png",
            )
        lines.append(json.dumps(entry, sort_keys=True))
    lines.append(json.dumps({"final": summary}, sort_keys=True))
    write_atomic_text(out / "run_report.jsonl", "\n".join(lines) + "\n")
    click.echo(f"{mode} learning finished: {template.n} elements -> {out / 'template.json'}")


@cli.command()
@click.argument("template_file", type=click.Path(dir_okay=False))
@click.argument("image_path", type=click.Path(dir_okay=False))
@common_options
@_guard
def detect(template_file, image_path, config_path, seed, out_dir, n_elements, resize):
    """Detect a learned template in one image and sketch the match."""
    template, provenance = load_template(template_file)
    if config_path is not None:
        cfg = _resolve(config_path, seed, n_elements, resize)
    elif provenance.get("config"):
        from .config import config_from_dict

        cfg = config_from_dict(provenance["config"]).with_overrides(
            seed=seed, resize=resize
        )
    else:
        cfg = _resolve(None, seed, n_elements, resize)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = Dictionary(template.params)
    act = ActivitySet(cfg.pursuit.b1, cfg.pursuit.b2)
    image = load_gray(image_path, cfg.luma)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        det = run_detect(image, template, list(cfg.detect.factors), act, dictionary)
    _emit_warnings(caught)
    record = {
        "image": Path(image_path).name,
        "x": det.col,
        "y": det.row,
        "factor": det.factor,
        "score": det.score,
        "score_recomputed": det.score_from_activities(template),
        "activities": [list(a) for a in det.activities],
        "config_hash": cfg.hash(),
    }
    click.echo(json.dumps(record, sort_keys=True))

    level = resample(image, det.factor)
    sketch = render_detection_sketch(template, det, level.shape)
    save_png(overlay_sketch(level, sketch), out / "overlay.png")


@cli.command()
@click.argument("template_file", type=click.Path(dir_okay=False))
@click.option("--size", default=None, help="Canvas as WIDTHxHEIGHT (defaults to the training lattice).")
@common_options
@_guard
def render(template_file, size, config_path, seed, out_dir, n_elements, resize):
    """Render the bar sketch of a saved template."""
    template, _ = load_template(template_file)
    shape = None
    if size:
        try:
            w_str, h_str = size.lower().split("x")
            shape = (int(h_str), int(w_str))
        except ValueError as exc:
            raise click.UsageError("--size must look like 120x100") from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "sketch.png"
    save_png(render_sketch(template, canvas_shape=shape), target)
    click.echo(str(target))


@cli.command("pool-background")
@click.argument("background_dir", type=click.Path(file_okay=False))
@common_options
@_guard
def pool_background(background_dir, config_path, seed, out_dir, n_elements, resize):
    """Pool a background corpus into a reusable reference model file."""
    cfg = _resolve(config_path, seed, n_elements, resize)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = Dictionary(cfg.gabor)
    paths = _list_corpus(background_dir)
    imgs = [normalize_image(load_gray(p, cfg.luma), dictionary) for p in paths]
    m = cfg.model
    ref = pool_reference(imgs, dictionary, m.xi, m.bins, m.lambda_max, m.lambda_steps)
    payload = {
        "reference": ref.to_dict(),
        "provenance": _provenance(cfg, paths, f"dir:{background_dir}"),
    }
    target = out / "reference.json"
    write_atomic_text(target, json.dumps(payload, sort_keys=True, indent=1) + "\n")
    click.echo(str(target))


def main() -> None:
    cli(prog_name="activebasis")


if __name__ == "__main__":
    main()
