"""Toy differentiable classifier, Ten-Crop inference, and suite evaluation.

The classifier is multinomial logistic regression on a fixed deterministic
feature map (pooled grayscale pixels plus radial spectral-band energies),
so logits, image-space gradients, and final-layer parameter gradients are
all available in closed form. Suite evaluation turns a generated manifest
into per-variant top-1 accuracy and dropped accuracy DA = acc_original -
acc, with a per-class breakdown.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataset, InvalidLabel, IoError, ValidationError
from .grid import ImageGrid
from .gridio import read_png
from .metrics import band_masks, energy_score, gradnorm_score, score_overlap

DEFAULT_POOL_GRID = 8
DEFAULT_BANDS = 6


def _pool_cells(size: int, grid: int):
    edges = [int(np.floor(i * size / grid)) for i in range(grid + 1)]
    return [(edges[i], max(edges[i + 1], edges[i] + 1)) for i in range(grid)]


@dataclass
class ToyClassifier:
    """Linear softmax head over a fixed feature map."""

    weights: np.ndarray
    bias: np.ndarray
    class_names: list[str]
    pool_grid: int = DEFAULT_POOL_GRID
    bands: int = DEFAULT_BANDS
    feat_mean: np.ndarray = field(default=None)
    feat_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        k, d = self.weights.shape
        if self.bias.shape != (k,) or len(self.class_names) != k:
            raise ValidationError("classifier weight/bias/class-name shapes disagree")
        if self.feat_mean is None:
            self.feat_mean = np.zeros(d)
        if self.feat_scale is None:
            self.feat_scale = np.ones(d)
        self.feat_mean = np.asarray(self.feat_mean, dtype=np.float64)
        self.feat_scale = np.asarray(self.feat_scale, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def raw_features(self, image: ImageGrid) -> np.ndarray:
        gray = image.gray()
        h, w = gray.shape
        pooled = np.empty(self.pool_grid * self.pool_grid)
        rows = _pool_cells(h, self.pool_grid)
        cols = _pool_cells(w, self.pool_grid)
        i = 0
        for r0, r1 in rows:
            for c0, c1 in cols:
                pooled[i] = gray[r0:r1, c0:c1].mean()
                i += 1
        power = np.abs(np.fft.fft2(gray)) ** 2 / float(h * w) ** 2
        masks = band_masks(h, w, self.bands)
        bands = np.array([power[m].sum() for m in masks])
        return np.concatenate([pooled, bands])

    def features(self, image: ImageGrid) -> np.ndarray:
        return (self.raw_features(image) - self.feat_mean) / self.feat_scale

    def logits_from_features(self, phi: np.ndarray) -> np.ndarray:
        return self.weights @ phi + self.bias

    def logits(self, image: ImageGrid) -> np.ndarray:
        return self.logits_from_features(self.features(image))

    def input_gradient(self, image: ImageGrid, grad_logits: np.ndarray) -> ImageGrid:
        """Pull a logit-space gradient back to image space (exact Jacobian)."""
        v = (self.weights.T @ np.asarray(grad_logits, dtype=np.float64)) / self.feat_scale
        gray = image.gray()
        h, w = gray.shape
        g = self.pool_grid
        grad_gray = np.zeros((h, w))
        rows = _pool_cells(h, g)
        cols = _pool_cells(w, g)
        i = 0
        for r0, r1 in rows:
            for c0, c1 in cols:
                grad_gray[r0:r1, c0:c1] += v[i] / ((r1 - r0) * (c1 - c0))
                i += 1
        v_band = v[g * g :]
        if np.any(v_band != 0.0):
            spec = np.fft.fft2(gray)
            masks = band_masks(h, w, self.bands)
            weighted = np.zeros_like(spec)
            for b in range(self.bands):
                if v_band[b] != 0.0:
                    weighted += v_band[b] * np.where(masks[b], spec, 0.0)
            grad_gray += 2.0 / float(h * w) * np.fft.ifft2(weighted).real
        grad = np.repeat(grad_gray[:, :, None], image.channels, axis=2) / image.channels
        return ImageGrid(grad)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def train_toy_classifier(
    dataset,
    epochs: int = 200,
    lr: float = 1.0,
    seed: int = 0,
    class_names: list[str] | None = None,
    pool_grid: int = DEFAULT_POOL_GRID,
    bands: int = DEFAULT_BANDS,
) -> ToyClassifier:
    """Full-batch logistic regression with a halving line search.

    dataset: sequence of (ImageGrid, label) pairs. Training cross entropy
    decreases monotonically; the run is deterministic (zero init, fixed
    feature standardization), with `seed` kept for interface stability.
    """
    pairs = [(img, int(lab)) for img, lab in dataset]
    labels = np.array([lab for _, lab in pairs])
    if labels.size == 0:
        raise DegenerateDataset("empty training set")
    k = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=k)
    if k < 2 or np.any(counts < 2):
        raise DegenerateDataset(f"need >= 2 classes with >= 2 examples each, got counts {counts.tolist()}")
    if class_names is None:
        class_names = [f"class-{i}" for i in range(k)]

    probe = ToyClassifier(np.zeros((k, 1)), np.zeros(k), ["x"] * k, pool_grid, bands)
    raw = np.stack([probe.raw_features(img) for img, _ in pairs])
    mean = raw.mean(axis=0)
    scale = raw.std(axis=0)
    scale[scale < 1e-8] = 1.0
    phi = (raw - mean) / scale
    n, d = phi.shape

    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    weights = np.zeros((k, d))
    bias = np.zeros(k)

    def loss_of(wt, bs):
        z = phi @ wt.T + bs
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        return -logp[np.arange(n), labels].mean()

    loss = loss_of(weights, bias)
    step = float(lr)
    for _ in range(int(epochs)):
        p = _softmax(phi @ weights.T + bias)
        g = p - onehot
        gw = g.T @ phi / n
        gb = g.mean(axis=0)
        while step > 1e-12:
            w_new = weights - step * gw
            b_new = bias - step * gb
            new_loss = loss_of(w_new, b_new)
            if new_loss <= loss:
                break
            step *= 0.5
        else:
            break
        weights, bias, loss = w_new, b_new, new_loss

    return ToyClassifier(weights, bias, list(class_names), pool_grid, bands, mean, scale)


def predict(classifier, image: ImageGrid):
    """(argmax label, logits) for a single full-frame view."""
    logits = classifier.logits(image)
    return int(np.argmax(logits)), logits


def _crop(image: ImageGrid, y0: int, x0: int, ch: int, cw: int) -> ImageGrid:
    return ImageGrid(image.data[y0 : y0 + ch, x0 : x0 + cw])


def predict_tencrop(classifier, image: ImageGrid, crop_fraction: float = 0.875):
    """Average logits over 4 corners + center and their horizontal mirrors."""
    if not (0.0 < crop_fraction <= 1.0):
        raise ValidationError("crop_fraction must lie in (0, 1]")
    h, w = image.height, image.width
    ch = max(1, int(round(crop_fraction * h)))
    cw = max(1, int(round(crop_fraction * w)))
    origins = [
        (0, 0),
        (0, w - cw),
        (h - ch, 0),
        (h - ch, w - cw),
        ((h - ch) // 2, (w - cw) // 2),
    ]
    total = None
    for y0, x0 in origins:
        view = _crop(image, y0, x0, ch, cw)
        mirror = ImageGrid(view.data[:, ::-1])
        for v in (view, mirror):
            z = classifier.logits(v)
            total = z if total is None else total + z
    logits = total / 10.0
    return int(np.argmax(logits)), logits


def dropped_accuracy(acc_original: float, acc: float) -> float:
    """DA = acc_original - acc (may be negative)."""
    for v in (acc_original, acc):
        if not (0.0 <= v <= 1.0):
            raise ValidationError(f"accuracy {v} outside [0, 1]")
    return acc_original - acc


@dataclass
class EvalEntry:
    """One source image with its labeled variants (or skip reasons)."""

    source: str
    mask: str
    label: int
    seed: int
    variants: dict = field(default_factory=dict)
    skips: dict = field(default_factory=dict)


@dataclass
class EvalManifest:
    seed: int
    entries: list

    def to_dict(self) -> dict:
        out = {"seed": self.seed, "entries": []}
        for e in self.entries:
            variants = []
            for name in sorted(set(e.variants) | set(e.skips)):
                if name in e.variants:
                    rec = dict(e.variants[name])
                    rec["name"] = name
                else:
                    rec = {"name": name, "skip_reason": e.skips[name]}
                variants.append(rec)
            out["entries"].append(
                {"source": e.source, "mask": e.mask, "label": e.label, "seed": e.seed, "variants": variants}
            )
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalManifest":
        entries = []
        for rec in obj["entries"]:
            variants, skips = {}, {}
            for v in rec["variants"]:
                name = v["name"]
                if "skip_reason" in v:
                    skips[name] = v["skip_reason"]
                else:
                    variants[name] = {k: v[k] for k in v if k != "name"}
            entries.append(
                EvalEntry(rec["source"], rec["mask"], int(rec["label"]), int(rec["seed"]), variants, skips)
            )
        return cls(int(obj["seed"]), entries)


@dataclass
class VariantResult:
    n: int
    top1: float
    da: float
    per_class_da: dict


@dataclass
class AttributeReport:
    """Per-variant accuracy and dropped accuracy with per-class breakdown."""

    original_n: int
    original_top1: float
    per_class_top1: dict
    variants: dict
    skips: list
    class_names: list

    @property
    def average_da(self) -> float:
        if not self.variants:
            return 0.0
        return float(np.mean([v.da for v in self.variants.values()]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["variant", "n", "top1", "da"] + list(self.class_names))
        writer.writerow(
            ["original", self.original_n, f"{self.original_top1:.6f}", f"{0.0:.6f}"]
            + [f"{0.0:.6f}" for _ in self.class_names]
        )
        for name in sorted(self.variants):
            v = self.variants[name]
            writer.writerow(
                [name, v.n, f"{v.top1:.6f}", f"{v.da:.6f}"]
                + [f"{v.per_class_da.get(c, 0.0):.6f}" for c in self.class_names]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        def se(p, n):
            return float(np.sqrt(max(p * (1.0 - p), 0.0) / n)) if n > 0 else 0.0

        variants = {}
        for name in sorted(self.variants):
            v = self.variants[name]
            variants[name] = {
                "n": v.n,
                "top1": v.top1,
                "top1_se": se(v.top1, v.n),
                "da": v.da,
                "per_class_da": {c: v.per_class_da.get(c, 0.0) for c in self.class_names},
            }
        return {
            "original": {
                "n": self.original_n,
                "top1": self.original_top1,
                "top1_se": se(self.original_top1, self.original_n),
                "per_class_top1": dict(self.per_class_top1),
            },
            "variants": variants,
            "average_da": self.average_da,
            "skips": [list(s) for s in self.skips],
        }


def evaluate_suite(classifier, manifest: EvalManifest, tencrop: bool = False, base_dir: str = "") -> AttributeReport:
    """Score every manifest entry and variant; missing files become skips."""
    if not manifest.entries:
        raise ValidationError("manifest has no entries")
    infer = (lambda img: predict_tencrop(classifier, img)) if tencrop else (lambda img: predict(classifier, img))
    names = list(classifier.class_names)

    def resolve(path):
        return path if os.path.isabs(path) or not base_dir else os.path.join(base_dir, path)

    per_class_n = {c: 0 for c in names}
    per_class_orig = {c: 0 for c in names}
    orig_hits = 0
    variant_hits: dict[str, list] = {}
    skips = []

    for entry in manifest.entries:
        if not (0 <= entry.label < len(names)):
            raise InvalidLabel(f"label {entry.label} outside classifier range")
        img = read_png(resolve(entry.source))
        pred, _ = infer(img)
        correct = pred == entry.label
        cname = names[entry.label]
        per_class_n[cname] += 1
        per_class_orig[cname] += int(correct)
        orig_hits += int(correct)

        for vname, reason in entry.skips.items():
            skips.append((entry.source, vname, reason))
        for vname, rec in entry.variants.items():
            path = resolve(rec["output"])
            if not os.path.exists(path):
                skips.append((entry.source, vname, "missing output file"))
                continue
            vimg = read_png(path)
            vpred, _ = infer(vimg)
            variant_hits.setdefault(vname, []).append((entry.label, int(vpred == entry.label)))

    n = len(manifest.entries)
    orig_top1 = orig_hits / n
    per_class_top1 = {c: (per_class_orig[c] / per_class_n[c] if per_class_n[c] else 0.0) for c in names}

    variants = {}
    for vname, hits in variant_hits.items():
        vn = len(hits)
        top1 = sum(h for _, h in hits) / vn
        per_class_da = {}
        for ci, cname in enumerate(names):
            cls_hits = [h for lab, h in hits if lab == ci]
            if cls_hits:
                per_class_da[cname] = per_class_top1[cname] - float(np.mean(cls_hits))
        variants[vname] = VariantResult(vn, top1, dropped_accuracy(orig_top1, top1), per_class_da)

    return AttributeReport(n, orig_top1, per_class_top1, variants, skips, names)


def ood_report(classifier, original_images, edited_images, bins: int = 20) -> dict:
    """Histogram overlap of Energy and GradNorm score distributions."""
    if not original_images or not edited_images:
        raise ValidationError("both image sets must be nonempty")
    out = {}
    for method, scorer in (
        ("energy", lambda im: energy_score(classifier.logits(im)).value),
        ("gradnorm", lambda im: gradnorm_score(classifier, im).value),
    ):
        ref = [scorer(im) for im in original_images]
        test = [scorer(im) for im in edited_images]
        out[method] = score_overlap(ref, test, bins)
    return out


CKPT_MAGIC = "attrforge-classifier"


def save_classifier(path, clf: ToyClassifier) -> None:
    """JSON header line + little-endian float32 payload."""
    header = {
        "format": CKPT_MAGIC,
        "version": 1,
        "classes": list(clf.class_names),
        "pool_grid": clf.pool_grid,
        "bands": clf.bands,
        "k": clf.num_classes,
        "d": clf.dim,
    }
    payload = np.concatenate(
        [clf.weights.ravel(), clf.bias, clf.feat_mean, clf.feat_scale]
    ).astype("<f8")
    try:
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
            fh.write(payload.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_classifier(path) -> ToyClassifier:
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("ascii"))
            payload = fh.read()
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if header.get("format") != CKPT_MAGIC:
        raise IoError(f"{path}: not a classifier checkpoint")
    k, d = int(header["k"]), int(header["d"])
    arr = np.frombuffer(payload, dtype="<f8")
    if arr.size != k * d + k + d + d:
        raise IoError(f"{path}: truncated checkpoint payload")
    weights = arr[: k * d].reshape(k, d)
    bias = arr[k * d : k * d + k]
    mean = arr[k * d + k : k * d + k + d]
    scale = arr[k * d + k + d :]
    return ToyClassifier(
        weights.copy(), bias.copy(), list(header["classes"]),
        int(header["pool_grid"]), int(header["bands"]), mean.copy(), scale.copy(),
    )
