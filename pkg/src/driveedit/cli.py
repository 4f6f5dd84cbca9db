"""Command-line entry points for the editing-data toolkit."""
from __future__ import annotations

import dataclasses
import json
import os
import sys

import click
import numpy as np

from . import descriptor, evalkit, pseudogen, qc
from .backends import (HashEmbeddingProvider, default_backend_suite,
                       descriptor_backends, load_backend_config)
from .banks import DEFAULT_BANKS
from .core.images import load_image
from .core.serialization import (read_manifest, save_sample, serialize_mask,
                                 write_manifest)
from .core.types import annotation_from_dict, annotation_to_dict, spec_from_dict
from .langmask import build_langmask
from .pairing import PairingConfig, load_poses, pair_logs, validate_log

_IMAGE_SUFFIXES = (".npy", ".png", ".jpg", ".jpeg", ".bmp")


def _suite(backends_path: str | None, seed: int = 0) -> dict:
    if backends_path:
        return load_backend_config(backends_path)
    return default_backend_suite(seed=seed)


def _echo_json(record: dict) -> None:
    click.echo(json.dumps(record, ensure_ascii=False))


@click.group()
def main():
    """Tools to build instruction-guided editing data from driving logs."""


@main.command()
@click.option("--poses", required=True, type=click.Path(exists=True),
              help="JSONL of camera poses")
@click.option("--threshold", default=1.0, show_default=True,
              help="acceptance threshold on the pose distance")
@click.option("--radius", default=10.0, show_default=True,
              help="spatial candidate radius in meters")
@click.option("--wrap-angles", is_flag=True, default=False)
@click.option("--out", required=True, type=click.Path())
def pair(poses, threshold, radius, wrap_angles, out):
    """Match frames across traversals by pose disparity."""
    frames = load_poses(poses)
    validate_log(frames)
    cfg = PairingConfig(distance_threshold=threshold, radius=radius,
                        wrap_angles=wrap_angles)
    count = 0
    with open(out, "w", encoding="utf-8") as f:
        for result in pair_logs(frames, cfg):
            f.write(json.dumps(dataclasses.asdict(result)) + "\n")
            count += 1
    click.echo(f"wrote {count} accepted pairs to {out}")


@main.command()
@click.option("--images", required=True, type=click.Path(exists=True))
@click.option("--backends", "backends_path", default=None,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def describe(images, backends_path, out):
    """Annotate a directory of images into JSONL scene records."""
    suite = _suite(backends_path)
    prompt = descriptor.load_vlm_prompt(suite.get("prompt_path"))
    names = sorted(n for n in os.listdir(images)
                   if n.lower().endswith(_IMAGE_SUFFIXES))
    with open(out, "w", encoding="utf-8") as f:
        for name in names:
            img = load_image(os.path.join(images, name))
            ann = descriptor.annotate(img, descriptor_backends(suite),
                                      image_id=os.path.splitext(name)[0],
                                      prompt=prompt)
            f.write(json.dumps(annotation_to_dict(ann), ensure_ascii=False) + "\n")
    click.echo(f"annotated {len(names)} images into {out}")


@main.command()
@click.option("--annotation", required=True, type=click.Path(exists=True),
              help="scene annotation JSON (for image dims)")
@click.option("--edits", required=True, type=click.Path(exists=True),
              help="JSON list of edit specs")
@click.option("--dim", default=64, show_default=True)
@click.option("--out", required=True, type=click.Path())
def mask(annotation, edits, dim, out):
    """Build a language mask file from an annotation and edit specs."""
    with open(annotation, encoding="utf-8") as f:
        ann = annotation_from_dict(json.load(f))
    with open(edits, encoding="utf-8") as f:
        specs = [spec_from_dict(d) for d in json.load(f)]
    provider = HashEmbeddingProvider(dim=dim)
    built = build_langmask(specs, ann.height, ann.width, provider)
    size = serialize_mask(built, out)
    click.echo(f"wrote {size} bytes to {out}")


def _load_annotations(path: str):
    with open(path, encoding="utf-8") as f:
        return [annotation_from_dict(json.loads(line))
                for line in f if line.strip()]


def _image_for(ann, images_dir: str) -> np.ndarray:
    for suffix in _IMAGE_SUFFIXES:
        p = os.path.join(images_dir, ann.image_id + suffix)
        if os.path.exists(p):
            return load_image(p)
    raise click.ClickException(
        f"no image for {ann.image_id!r} under {images_dir}")


@main.group(name="pseudogen")
def pseudogen_group():
    """Generate global or local pseudo-pairs from annotated images."""


def _pseudo_options(fn):
    for deco in (
        click.option("--annotations", required=True, type=click.Path(exists=True)),
        click.option("--images", required=True, type=click.Path(exists=True),
                     help="directory of images named by image_id"),
        click.option("--backends", "backends_path", default=None,
                     type=click.Path(exists=True)),
        click.option("--seed", default=0, show_default=True),
        click.option("--out", required=True, type=click.Path()),
    ):
        fn = deco(fn)
    return fn


def _finish_pseudogen(entries, rejected, out):
    manifest_path = os.path.join(out, "manifest.jsonl")
    result = write_manifest(entries, manifest_path)
    click.echo(f"wrote {result.written} samples to {manifest_path}; "
               f"dropped {rejected}")


@pseudogen_group.command(name="global")
@_pseudo_options
def pseudogen_global(annotations, images, backends_path, seed, out):
    suite = _suite(backends_path, seed)
    os.makedirs(out, exist_ok=True)
    entries, rejected = [], 0
    for ann in _load_annotations(annotations):
        img = _image_for(ann, images)
        rng = pseudogen.rng_for(seed, ann.image_id)
        outcome = pseudogen.make_global_pair(
            img, ann, suite["generator"], suite["verifier"], rng,
            mask_dim=suite["embedding"].dim)
        if not outcome.accepted:
            rejected += 1
            _echo_json({"image_id": ann.image_id, "dropped": outcome.reason})
            continue
        entries.append(save_sample(outcome.sample, out))
    _finish_pseudogen(entries, rejected, out)


@pseudogen_group.command(name="local")
@_pseudo_options
def pseudogen_local(annotations, images, backends_path, seed, out):
    suite = _suite(backends_path, seed)
    os.makedirs(out, exist_ok=True)
    entries, rejected = [], 0
    for ann in _load_annotations(annotations):
        img = _image_for(ann, images)
        rng = pseudogen.rng_for(seed, ann.image_id)
        try:
            outcome = pseudogen.make_local_pair(img, ann, DEFAULT_BANKS,
                                                suite, rng)
        except ValueError as e:
            rejected += 1
            _echo_json({"image_id": ann.image_id, "dropped": str(e)})
            continue
        if not outcome.accepted:
            rejected += 1
            _echo_json({"image_id": ann.image_id, "dropped": outcome.reason})
            continue
        entry = save_sample(outcome.sample, out)
        pseudogen.save_provenance(outcome.provenance,
                                  os.path.dirname(entry.source_path))
        entries.append(entry)
    _finish_pseudogen(entries, rejected, out)


@main.command(name="qc")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--backends", "backends_path", default=None,
              type=click.Path(exists=True))
@click.option("--report", required=True, type=click.Path())
def qc_command(in_dir, backends_path, report):
    """Run quality gates over a generated sample directory."""
    from .core.serialization import load_sample

    vlm = qc.HeuristicQCVLM()
    entries = read_manifest(os.path.join(in_dir, "manifest.jsonl"))
    accepted = 0
    with open(report, "w", encoding="utf-8") as f:
        for entry in entries:
            sample_dir = os.path.dirname(entry.source_path)
            if not os.path.exists(os.path.join(sample_dir, "provenance.json")):
                continue  # global pairs carry no local provenance
            sample = load_sample(entry)
            prov = pseudogen.load_provenance(sample_dir)
            verdict = qc.run_qc(sample, prov, vlm)
            record = {"pair_id": entry.pair_id, **verdict.to_dict()}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            accepted += verdict.accepted
    click.echo(f"qc report at {report}: {accepted} accepted")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def train(config_path, out):
    """Two-stage training of the toy generator on synthetic scenes."""
    from .trainkit import TrainConfig, make_synthetic_dataset
    from .trainkit import train as run_train

    with open(config_path, encoding="utf-8") as f:
        raw = json.load(f)
    dataset_size = int(raw.pop("dataset_size", 256))
    cfg = TrainConfig.from_dict(raw)
    dataset = make_synthetic_dataset(dataset_size, cfg.seed)
    result = run_train(cfg, dataset, out_dir=out)
    last = result.log[-1] if result.log else {}
    click.echo(f"checkpoint: {result.checkpoint_path}")
    click.echo(f"metrics: {result.log_path}")
    if last:
        click.echo(f"final step: {json.dumps(last)}")


@main.command(name="eval")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--outputs", required=True, type=click.Path(exists=True),
              help="directory of model outputs named <pair_id>.npy")
@click.option("--backends", "backends_path", default=None,
              type=click.Path(exists=True))
@click.option("--report", required=True, type=click.Path())
def eval_command(manifest, outputs, backends_path, report):
    """Aggregate pixel and embedding metrics over a manifest."""
    suite = _suite(backends_path)
    entries = read_manifest(manifest)
    output_map = {}
    for entry in entries:
        safe = "".join(c if c.isalnum() or c in "-_." else "_"
                       for c in entry.pair_id)
        path = os.path.join(outputs, safe + ".npy")
        if not os.path.exists(path):
            raise click.ClickException(f"missing output {path}")
        output_map[entry.pair_id] = np.load(path)
    providers = {"clip": suite["embedding"],
                 "dino": HashEmbeddingProvider(dim=32, seed=7)}
    table = evalkit.evaluate_manifest(entries, output_map, providers)
    with open(report, "w", encoding="utf-8") as f:
        json.dump(table, f, ensure_ascii=False, indent=2)
    click.echo(f"wrote {report}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True)
@click.option("--backends", "backends_path", default=None,
              type=click.Path(exists=True))
@click.option("--persist-dir", default=None, type=click.Path())
def serve(host, port, backends_path, persist_dir):
    """Run the interactive edit-session HTTP service."""
    import uvicorn

    from .editsvc import build_app

    suite = _suite(backends_path)
    uvicorn.run(build_app(suite, persist_dir), host=host, port=port)


if __name__ == "__main__":
    main(sys.argv[1:])
