"""Command-line front end: edit, generate, evaluate, metrics, train, schema.

Every command is deterministic given (config, seed): reruns produce
byte-identical manifests, images, and reports. Exit codes: 0 ok, 2
usage/validation, 3 I/O, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import schemas
from .config import RunConfig, build_denoisers, build_schedule, load_config, load_grid_dir
from .editor import SUITE_VARIANTS, EditSpec, SuiteConfig, apply_edit, suite_specs
from .errors import AttrForgeError, IoError, ValidationError
from .grid import ImageGrid, RngStream
from .gridio import read_mask_png, read_png, write_png
from .guidance import complexity_value
from .harness import (
    EvalEntry,
    EvalManifest,
    evaluate_suite,
    load_classifier,
    predict,
    save_classifier,
    train_toy_classifier,
)
from .metrics import energy_score, glcm_texture, gradnorm_score
from .toydata import TOY_CLASS_NAMES, toy_dataset

MANIFEST_FORMAT = "attrforge-manifest"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path, obj) -> None:
    try:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(obj, fh, sort_keys=True, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def _load_index(path) -> list[dict]:
    doc = _load_json(path)
    if not isinstance(doc, list) or not doc:
        raise ValidationError(f"{path}: index must be a nonempty JSON array")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for i, rec in enumerate(doc):
        unknown = set(rec) - {"image", "mask", "label"}
        if unknown:
            raise ValidationError(f"{path}[{i}]: unknown keys {sorted(unknown)}")
        if "image" not in rec or "mask" not in rec:
            raise ValidationError(f"{path}[{i}]: needs image and mask")
        entries.append(
            {
                "image": os.path.join(base, rec["image"]),
                "mask": os.path.join(base, rec["mask"]),
                "label": int(rec.get("label", -1)),
            }
        )
    return entries


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for flag, attr in (("seed", "seed"), ("threads", "threads"), ("lam", "lam")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg


def cmd_edit(args) -> int:
    cfg = _config_from_args(args)
    image = read_png(args.image)
    mask = read_mask_png(args.mask)
    sched = build_schedule(cfg)

    kind = args.kind
    t0 = args.t0 or (cfg.t0_background if kind == "background" else cfg.t0_object)
    seed = cfg.seed if args.seed is None else args.seed
    spec_kwargs = {"kind": kind, "t0": t0, "seed": seed}
    if kind == "background":
        spec_kwargs["mode"] = args.mode
        if args.mode == "guided":
            spec_kwargs["lam"] = cfg.lam if args.lam is None else args.lam
            spec_kwargs["adversarial"] = args.adversarial
            spec_kwargs["band"] = cfg.band
            spec_kwargs["cutoff"] = cfg.cutoff
        if args.mode == "template":
            if not args.template:
                raise ValidationError("template mode needs --template checker|stripe")
            spec_kwargs["template"] = args.template
            spec_kwargs["template_period"] = args.period
    else:
        if args.scale is not None:
            spec_kwargs["scale"] = args.scale
        if args.rate is not None:
            spec_kwargs["rate"] = args.rate if args.rate == "full" else float(args.rate)
        if args.offset is not None:
            parts = args.offset.split(",")
            if len(parts) != 2:
                raise ValidationError("--offset expects X,Y")
            spec_kwargs["offset"] = (float(parts[0]), float(parts[1]))
        if args.angle is not None:
            spec_kwargs["angle"] = args.angle
    spec = EditSpec(**spec_kwargs)

    classifier = load_classifier(args.classifier) if args.classifier else None
    label = args.label
    pool = None
    if args.pool_dir:
        pool = load_grid_dir(args.pool_dir)
    extra = [image] if cfg.denoiser == "empirical" else None
    scene_den, bg_den = build_denoisers(cfg, sched, extra_atoms=extra)
    den = scene_den if kind == "background" and spec.mode in ("guided", "invert") else bg_den

    resolved, out = apply_edit(image, mask, spec, den, classifier=classifier, label=label, pool=pool)
    write_png(args.out, out.clamp())
    sidecar = {
        "source": args.image,
        "mask": args.mask,
        "seed": seed,
        "spec": resolved.to_dict(),
        "config": cfg.to_dict(),
    }
    _dump_json(os.path.splitext(args.out)[0] + ".json", sidecar)
    print(args.out)
    return 0


def _generate_entry(cfg, entry, entry_seed, out_dir, stem, classifier, pool, prior, scene_den, bg_den):
    """One image's 11 variants; returns the manifest entry record."""
    image = read_png(entry["image"])
    mask = read_mask_png(entry["mask"])
    suite = SuiteConfig(
        seed=entry_seed,
        denoiser=scene_den,
        classifier=classifier,
        label=entry["label"],
        pool=pool,
        t0_background=cfg.t0_background,
        t0_object=cfg.t0_object,
        lam=cfg.lam,
        band=cfg.band,
        cutoff=cfg.cutoff,
        rd_on_small=cfg.rd_on_small,
    )
    os.makedirs(os.path.join(out_dir, stem), exist_ok=True)

    variants = []
    for name, spec in suite_specs(suite):
        rel = os.path.join(stem, f"{name}.png")
        path = os.path.join(out_dir, rel)
        previous = prior.get((entry["image"], name))
        if previous and os.path.exists(path) and previous.get("sha256") == _sha256(path):
            variants.append(dict(previous, name=name))
            continue
        den = scene_den if spec.kind == "background" and spec.mode in ("guided", "invert") else bg_den
        try:
            resolved, img = apply_edit(
                image, mask, spec, den, classifier=classifier, label=entry["label"], pool=pool
            )
        except AttrForgeError as exc:
            variants.append({"name": name, "skip_reason": f"{type(exc).__name__}: {exc}"})
            continue
        write_png(path, img.clamp())
        variants.append({"name": name, "spec": resolved.to_dict(), "output": rel, "sha256": _sha256(path)})
    return {
        "source": entry["image"],
        "mask": entry["mask"],
        "label": entry["label"],
        "seed": entry_seed,
        "variants": variants,
    }


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    entries = _load_index(args.index)
    sched = build_schedule(cfg)
    classifier = load_classifier(args.classifier) if args.classifier else None
    if classifier is None:
        raise ValidationError("generate needs --classifier for the adversarial variant")
    if any(e["label"] < 0 for e in entries):
        raise ValidationError("every index entry needs a label for suite generation")

    readable = []
    for e in entries:
        try:
            readable.append(read_png(e["image"]))
        except IoError:
            continue
    if args.pool_dir:
        pool = load_grid_dir(args.pool_dir)
    else:
        pool = readable
    extra = readable if cfg.denoiser == "empirical" else None
    scene_den, bg_den = build_denoisers(cfg, sched, extra_atoms=extra)

    os.makedirs(args.out_dir, exist_ok=True)
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    prior = {}
    if os.path.exists(manifest_path):
        old = _load_json(manifest_path)
        for e in old.get("entries", []):
            for v in e.get("variants", []):
                if "output" in v:
                    prior[(e["source"], v["name"])] = v

    base = RngStream(cfg.seed)
    stems = {}
    jobs = []
    for i, e in enumerate(entries):
        stem = os.path.splitext(os.path.basename(e["image"]))[0]
        if stem in stems:
            stems[stem] += 1
            stem = f"{stem}-{stems[stem]}"
        else:
            stems[stem] = 1
        jobs.append((i, e, base.child(f"entry-{i}-{os.path.basename(e['image'])}").stream, stem))
    results = {}
    failures = []
    workers = cfg.effective_threads()

    def run(job):
        i, entry, entry_seed, stem = job
        try:
            rec = _generate_entry(cfg, entry, entry_seed, args.out_dir, stem, classifier, pool, prior, scene_den, bg_den)
        except AttrForgeError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            rec = {
                "source": entry["image"],
                "mask": entry["mask"],
                "label": entry["label"],
                "seed": entry_seed,
                "variants": [{"name": name, "skip_reason": reason} for name in SUITE_VARIANTS],
            }
        return i, rec

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool_exec:
            for i, rec in pool_exec.map(run, jobs):
                results[i] = rec
    else:
        for job in jobs:
            i, rec = run(job)
            results[i] = rec

    records = [results[i] for i in range(len(entries))]
    for rec in records:
        bad = [v for v in rec["variants"] if "skip_reason" in v]
        if len(bad) == len(rec["variants"]):
            failures.append(rec["source"])
    # the parallelism degree is an execution detail, not part of the artifact
    cfg_doc = cfg.to_dict()
    del cfg_doc["run"]
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "seed": cfg.seed,
        "config": cfg_doc,
        "entries": records,
    }
    _dump_json(manifest_path, manifest)
    print(manifest_path)
    if failures and len(failures) == len(entries):
        print("all entries failed", file=sys.stderr)
        return 4
    return 0


def _manifest_from_file(path) -> tuple[EvalManifest, str]:
    doc = _load_json(path)
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValidationError(f"{path}: not an attrforge manifest")
    entries = []
    for rec in doc["entries"]:
        variants, skips = {}, {}
        for v in rec["variants"]:
            if "skip_reason" in v:
                skips[v["name"]] = v["skip_reason"]
            else:
                variants[v["name"]] = {k: v[k] for k in v if k != "name"}
        entries.append(
            EvalEntry(rec["source"], rec["mask"], int(rec["label"]), int(rec["seed"]), variants, skips)
        )
    return EvalManifest(int(doc["seed"]), entries), os.path.dirname(os.path.abspath(path))


def cmd_evaluate(args) -> int:
    classifier = load_classifier(args.classifier)
    manifest, base_dir = _manifest_from_file(args.manifest)
    report = evaluate_suite(classifier, manifest, tencrop=args.tencrop, base_dir=base_dir)

    csv_path = args.out_prefix + ".csv"
    json_path = args.out_prefix + ".json"
    try:
        with open(csv_path, "w", encoding="ascii", newline="") as fh:
            fh.write(report.to_csv())
    except OSError as exc:
        raise IoError(f"cannot write {csv_path}: {exc}") from exc
    _dump_json(json_path, report.to_dict())

    print(f"original  n={report.original_n}  top1={report.original_top1:.4f}")
    for name in sorted(report.variants):
        v = report.variants[name]
        print(f"{name:<10} n={v.n}  top1={v.top1:.4f}  da={v.da:+.4f}")
    print(f"average DA over variants: {report.average_da:+.4f}")
    print(csv_path)
    print(json_path)
    return 0


def _metric_row(image: ImageGrid, variant: str, classifier):
    lc = complexity_value(image)
    contrast, dissim = glcm_texture(image)
    if classifier is not None:
        e = f"{energy_score(classifier.logits(image)).value:.6f}"
        g = f"{gradnorm_score(classifier, image).value:.6f}"
    else:
        e = g = ""
    return [variant, f"{lc:.6f}", f"{contrast:.6f}", f"{dissim:.6f}", e, g]


def cmd_metrics(args) -> int:
    classifier = load_classifier(args.classifier) if args.classifier else None
    rows = []
    if args.manifest:
        manifest, base_dir = _manifest_from_file(args.manifest)
        for entry in manifest.entries:
            rows.append(_metric_row(read_png(entry.source), "original", classifier))
            for name in sorted(entry.variants):
                path = os.path.join(base_dir, entry.variants[name]["output"])
                rows.append(_metric_row(read_png(path), name, classifier))
    elif args.index:
        for entry in _load_index(args.index):
            rows.append(_metric_row(read_png(entry["image"]), "original", classifier))
    else:
        raise ValidationError("metrics needs --index or --manifest")

    csv_path = args.out_prefix + ".csv"
    try:
        with open(csv_path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["variant", "L_c", "glcm_contrast", "glcm_dissimilarity", "energy", "gradnorm"])
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {csv_path}: {exc}") from exc

    summary = {}
    for row in rows:
        bucket = summary.setdefault(row[0], {"L_c": [], "glcm_contrast": [], "glcm_dissimilarity": [], "energy": [], "gradnorm": []})
        for key, val in zip(("L_c", "glcm_contrast", "glcm_dissimilarity", "energy", "gradnorm"), row[1:]):
            if val != "":
                bucket[key].append(float(val))
    summary_doc = {}
    for variant, cols in sorted(summary.items()):
        summary_doc[variant] = {}
        for key, vals in cols.items():
            if vals:
                arr = np.asarray(vals)
                se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
                summary_doc[variant][key] = {"mean": float(arr.mean()), "se": se, "n": int(arr.size)}
    json_path = args.out_prefix + ".json"
    _dump_json(json_path, summary_doc)
    print(csv_path)
    print(json_path)
    return 0


def cmd_train(args) -> int:
    if args.toy:
        scenes = toy_dataset(args.toy, seed=args.seed if args.seed is not None else 0,
                             size=args.size, rate_range=(0.06, 0.55))
        dataset = [(s.image, s.label) for s in scenes]
        names = list(TOY_CLASS_NAMES)
    elif args.index:
        entries = _load_index(args.index)
        if any(e["label"] < 0 for e in entries):
            raise ValidationError("every index entry needs a label for training")
        dataset = [(read_png(e["image"]), e["label"]) for e in entries]
        k = max(lab for _, lab in dataset) + 1
        names = [f"class-{i}" for i in range(k)]
    else:
        raise ValidationError("train needs --toy N or --index index.json")
    clf = train_toy_classifier(dataset, epochs=args.epochs, lr=args.lr,
                               seed=args.seed if args.seed is not None else 0, class_names=names)
    acc = float(np.mean([predict(clf, img)[0] == lab for img, lab in dataset]))
    save_classifier(args.out, clf)
    print(f"training accuracy: {acc:.4f}")
    print(args.out)
    return 0


def cmd_schema(args) -> int:
    available = schemas.all_schemas()
    if args.name:
        if args.name not in available:
            raise ValidationError(f"unknown schema {args.name!r}; choose from {sorted(available)}")
        print(json.dumps(available[args.name], sort_keys=True, indent=1))
    else:
        print(json.dumps(available, sort_keys=True, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrforge", description="Object-attribute editing and robustness evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("edit", help="apply one attribute edit to an image")
    p.add_argument("--config", help="TOML run config")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=["background", "size", "position", "direction"])
    p.add_argument("--mode", default="guided", choices=["guided", "invert", "random", "template"])
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--adversarial", action="store_true")
    p.add_argument("--template", choices=["checker", "stripe"])
    p.add_argument("--period", type=int, default=4)
    p.add_argument("--scale", type=float)
    p.add_argument("--rate")
    p.add_argument("--offset", help="target rectangle origin X,Y")
    p.add_argument("--angle", type=float)
    p.add_argument("--t0", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--classifier", help="checkpoint for adversarial guidance")
    p.add_argument("--label", type=int)
    p.add_argument("--pool-dir", help="directory of .grid backgrounds for random mode")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("generate", help="generate the 11-variant suite for an image index")
    p.add_argument("--config", help="TOML run config")
    p.add_argument("--index", required=True, help="JSON list of {image, mask, label}")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--pool-dir", help="directory of .grid backgrounds for the random variant")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a generated manifest with a classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--tencrop", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("metrics", help="texture/OOD metric rows for images or a manifest")
    p.add_argument("--index")
    p.add_argument("--manifest")
    p.add_argument("--classifier")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("train", help="train the toy classifier")
    p.add_argument("--toy", type=int, help="generate N toy scenes as the training set")
    p.add_argument("--index", help="JSON list of {image, mask, label}")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("schema", help="print JSON schemas for the file formats")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_schema)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except AttrForgeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
