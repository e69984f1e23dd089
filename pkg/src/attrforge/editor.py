"""Object attribute edits: size, position, direction, and backgrounds.

Size edits scale the object about its rectangle center; position edits move
the rectangle origin to a target; direction edits rotate about the
rectangle center. Every composite follows the same latent recipe: remove
the object to get a pure background, noise it to t0, then denoise while
re-noising the transformed object and blending the two with the warped
mask at each step. Procedural checker/stripe templates and random pool
backgrounds reuse the compositing loop with the unmoved object.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diffusion import forward_sample, reverse_step
from .errors import (
    EmptyBackground,
    EmptyMask,
    EmptyPool,
    InvalidScale,
    ValidationError,
)
from .grid import AffineMatrix, ImageGrid, MaskGrid, ObjectRect, RngStream, bbox, warp, warp_mask
from .guidance import AdversarialObjective, GuidanceConfig, SpectralComplexity, background_edit, blend_latents

FULL = "full"

SUITE_VARIANTS = (
    "inver",
    "bg-neg20",
    "bg-pos20",
    "bg-adv20",
    "bg-random",
    "size-full",
    "size-0.1",
    "size-0.08",
    "size-0.05",
    "rp",
    "rd",
)

SIZE_RATE_LEVELS = (FULL, 0.1, 0.08, 0.05)
POSITION_BASE_RATE = 0.05


@dataclass(frozen=True)
class EditSpec:
    """Declarative description of one attribute edit.

    kind: background | size | position | direction. Background edits pick a
    mode (guided / invert / random / template); geometry edits carry a scale
    or target pixel rate, a target origin, or an angle. Unset stochastic
    fields (offset, angle) are materialized by :func:`resolve_edit` from the
    edit's seed.
    """

    kind: str
    t0: int
    seed: int
    mode: str = "guided"
    lam: float = 0.0
    adversarial: bool = False
    band: str = "all"
    cutoff: float = 0.5
    template: Optional[str] = None
    template_period: int = 4
    scale: Optional[float] = None
    rate: Optional[object] = None
    offset: Optional[tuple[float, float]] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("background", "size", "position", "direction"):
            raise ValidationError(f"unknown edit kind {self.kind!r}")
        if self.kind == "background" and self.mode not in ("guided", "invert", "random", "template"):
            raise ValidationError(f"unknown background mode {self.mode!r}")
        if self.t0 < 1:
            raise ValidationError("t0 must be >= 1")
        if self.scale is not None and self.scale <= 0.0:
            raise InvalidScale(f"scale must be positive, got {self.scale}")
        if self.rate is not None and self.rate != FULL and not (0.0 < float(self.rate) <= 1.0):
            raise ValidationError(f"pixel rate must lie in (0, 1] or be '{FULL}'")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "t0": self.t0, "seed": self.seed}
        if self.kind == "background":
            out["mode"] = self.mode
            if self.mode in ("guided", "invert"):
                out["lambda"] = self.lam
                out["adversarial"] = self.adversarial
                out["band"] = self.band
                if self.band == "high":
                    out["cutoff"] = self.cutoff
            if self.mode == "template":
                out["template"] = self.template
                out["period"] = self.template_period
        else:
            if self.scale is not None:
                out["scale"] = self.scale
            if self.rate is not None:
                out["rate"] = self.rate
            if self.offset is not None:
                out["offset"] = [self.offset[0], self.offset[1]]
            if self.angle is not None:
                out["angle"] = self.angle
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "EditSpec":
        known = {
            "kind", "t0", "seed", "mode", "lambda", "adversarial", "band",
            "cutoff", "template", "period", "scale", "rate", "offset", "angle",
        }
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown edit spec keys: {sorted(unknown)}")
        kwargs = dict(
            kind=obj["kind"],
            t0=int(obj["t0"]),
            seed=int(obj["seed"]),
        )
        if "mode" in obj:
            kwargs["mode"] = obj["mode"]
        if "lambda" in obj:
            kwargs["lam"] = float(obj["lambda"])
        for key, attr in (
            ("adversarial", "adversarial"), ("band", "band"), ("cutoff", "cutoff"),
            ("template", "template"), ("period", "template_period"),
            ("scale", "scale"), ("rate", "rate"), ("angle", "angle"),
        ):
            if key in obj and obj[key] is not None:
                kwargs[attr] = obj[key]
        if obj.get("offset") is not None:
            kwargs["offset"] = (float(obj["offset"][0]), float(obj["offset"][1]))
        return cls(**kwargs)


@dataclass(frozen=True)
class SceneDecomposition:
    """Pure background, transformed object image, and transformed mask."""

    background: ImageGrid
    object: ImageGrid
    mask: MaskGrid

    def __post_init__(self):
        if (
            self.background.shape != self.object.shape
            or self.mask.data.shape != self.background.data.shape[:2]
        ):
            raise ValidationError("decomposition parts must share spatial dims")


def size_matrix(s: float, rect: ObjectRect) -> AffineMatrix:
    """Scale about the rectangle center: dx = (1-s)(x + w/2), dy = (1-s)(y + h/2)."""
    if s <= 0.0:
        raise InvalidScale(f"scale must be positive, got {s}")
    cx, cy = rect.center
    return AffineMatrix.scaling(s, (1.0 - s) * cx, (1.0 - s) * cy)


def position_matrix(target_x: float, target_y: float, rect: ObjectRect) -> AffineMatrix:
    """Translate the rectangle origin to (target_x, target_y)."""
    return AffineMatrix.translation(target_x - rect.x, target_y - rect.y)


def direction_matrix(theta_deg: float, rect: ObjectRect) -> AffineMatrix:
    """Rotate about the rectangle center (conjugated origin rotation)."""
    cx, cy = rect.center
    rot = AffineMatrix.rotation_deg(theta_deg)
    return AffineMatrix.translation(cx, cy).compose(rot).compose(AffineMatrix.translation(-cx, -cy))


def transform_matrix(spec: EditSpec, rect: ObjectRect) -> AffineMatrix:
    """Affine transform for a resolved geometry edit."""
    if spec.kind == "size":
        if spec.scale is None:
            raise ValidationError("size edit not resolved: scale is unset")
        return size_matrix(spec.scale, rect)
    if spec.kind == "position":
        if spec.offset is None:
            raise ValidationError("position edit not resolved: offset is unset")
        if spec.scale is not None and spec.scale != 1.0:
            srect = _scaled_rect(spec.scale, rect)
            return position_matrix(spec.offset[0], spec.offset[1], srect).compose(size_matrix(spec.scale, rect))
        return position_matrix(spec.offset[0], spec.offset[1], rect)
    if spec.kind == "direction":
        if spec.angle is None:
            raise ValidationError("direction edit not resolved: angle is unset")
        # Scaling fixes the rect center, so the rotation center is unchanged.
        if spec.scale is not None and spec.scale != 1.0:
            return direction_matrix(spec.angle, rect).compose(size_matrix(spec.scale, rect))
        return direction_matrix(spec.angle, rect)
    raise ValidationError(f"no transform for edit kind {spec.kind!r}")


def _scaled_rect(s: float, rect: ObjectRect) -> ObjectRect:
    """Rectangle after scaling about its own center."""
    cx, cy = rect.center
    w = max(1, int(round(s * rect.w)))
    h = max(1, int(round(s * rect.h)))
    return ObjectRect(x=int(round(cx - s * rect.w / 2.0)), y=int(round(cy - s * rect.h / 2.0)), w=w, h=h)


def scale_for_rate(mask: MaskGrid, target_rate, margin: int = 1) -> float:
    """Scale achieving a target object pixel rate; 'full' maximizes in-frame size."""
    n_o = mask.object_count()
    if n_o == 0:
        raise EmptyMask("cannot size an empty mask")
    if target_rate == FULL:
        return _full_scale(mask, margin)
    rate = float(target_rate)
    if not (0.0 < rate <= 1.0):
        raise ValidationError(f"pixel rate must lie in (0, 1], got {rate}")
    return float(np.sqrt(rate * mask.height * mask.width / n_o))


def _full_scale(mask: MaskGrid, margin: int) -> float:
    """Largest scale whose warped mask bbox keeps a `margin`-pixel border."""
    rect = bbox(mask)
    cx, cy = rect.center
    w, h = mask.width, mask.height
    room = min(
        (cx - margin) / (rect.w / 2.0),
        (w - 1 - margin - cx) / (rect.w / 2.0),
        (cy - margin) / (rect.h / 2.0),
        (h - 1 - margin - cy) / (rect.h / 2.0),
    )
    hi = max(room * 1.05, 0.1)
    lo = 0.05

    def fits(s: float) -> bool:
        warped = warp_mask(mask, size_matrix(s, rect))
        if warped.object_count() == 0:
            return False
        return bbox(warped).inside(w, h, margin=margin)

    if fits(hi):
        return float(hi)
    if not fits(lo):
        return float(lo)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def remove_object(image: ImageGrid, mask: MaskGrid, denoiser, t0: int, rng: RngStream, hook=None) -> ImageGrid:
    """Resynthesize the masked region from its surroundings (diffusion inpainting).

    At every reverse step the unmasked region is replaced by the
    forward-noised original, so only the object area is generated.
    """
    if mask.object_count() == 0:
        raise EmptyMask("nothing to remove")
    known = mask.data <= 0.5
    if int(np.count_nonzero(known)) == 0:
        raise EmptyBackground("mask covers the whole frame; nothing to condition on")
    sched = denoiser.sched
    sched.check_step(t0)
    # Pre-fill the hole with the surround mean so the init does not leak the object.
    fill = float(image.data[known].mean())
    neutral = ImageGrid(np.where(mask.data[:, :, None] > 0.5, fill, image.data))
    x = forward_sample(neutral, t0, rng.normal_like(image), sched)
    for t in range(t0, 0, -1):
        x_free = reverse_step(x, denoiser, t, sched, rng)
        x_known = forward_sample(image, t, rng.normal_like(image), sched)
        x = blend_latents(mask, x_free, x_known)
        if hook is not None:
            hook(t, x_known, x)
    return x


def composite_edit(decomp: SceneDecomposition, denoiser, t0: int, rng: RngStream, hook=None) -> ImageGrid:
    """Blend the transformed object into the background along the chain.

    Noise the background to t0; per step denoise it, draw the object image
    at noise level t, and blend with the mask. The optional
    hook(t, noised_object, blended) observes every step.
    """
    sched = denoiser.sched
    sched.check_step(t0)
    x = forward_sample(decomp.background, t0, rng.normal_like(decomp.background), sched)
    for t in range(t0, 0, -1):
        x_bg = reverse_step(x, denoiser, t, sched, rng)
        x_obj = forward_sample(decomp.object, t, rng.normal_like(decomp.object), sched)
        x = blend_latents(decomp.mask, x_obj, x_bg)
        if hook is not None:
            hook(t, x_obj, x)
    return x


def random_background(image: ImageGrid, mask: MaskGrid, pool: list[ImageGrid], denoiser, t0: int, rng: RngStream) -> ImageGrid:
    """Composite the unmoved object onto a pool image drawn under the seed."""
    if not pool:
        raise EmptyPool("background pool is empty")
    if mask.object_count() == 0:
        raise EmptyMask("random background needs a nonempty object mask")
    idx = int(rng.integers(0, len(pool)))
    bg = pool[idx]
    if bg.shape != image.shape:
        raise ValidationError(f"pool image shape {bg.shape} != image shape {image.shape}")
    return composite_edit(SceneDecomposition(bg, image, mask), denoiser, t0, rng)


def template_background(name: str, period: int, height: int, width: int, channels: int = 1) -> ImageGrid:
    """Procedural +/-1 checker or stripe pattern."""
    if period < 1:
        raise ValidationError("period must be >= 1")
    ys, xs = np.mgrid[0:height, 0:width]
    if name == "checker":
        pattern = ((xs // period + ys // period) % 2) * 2.0 - 1.0
    elif name == "stripe":
        pattern = ((xs // period) % 2) * 2.0 - 1.0
    else:
        raise ValidationError(f"unknown template {name!r} (expected checker or stripe)")
    return ImageGrid(np.repeat(pattern[:, :, None], channels, axis=2))


def resolve_edit(spec: EditSpec, image: ImageGrid, mask: MaskGrid, rng: RngStream) -> EditSpec:
    """Materialize stochastic fields and rate targets into concrete numbers.

    Draws (if any) come first on the edit's stream, so a resolved spec
    recorded in a manifest regenerates the identical artifact.
    """
    if spec.kind == "background":
        return spec
    rect = bbox(mask)
    out = spec
    if out.rate is not None and out.scale is None:
        out = replace(out, scale=scale_for_rate(mask, out.rate))
    if out.kind == "position" and out.offset is None:
        srect = _scaled_rect(out.scale, rect) if out.scale not in (None, 1.0) else rect
        max_x = max(image.width - srect.w, 0)
        max_y = max(image.height - srect.h, 0)
        out = replace(out, offset=(float(rng.uniform(0.0, max_x)), float(rng.uniform(0.0, max_y))))
    if out.kind == "direction" and out.angle is None:
        out = replace(out, angle=float(rng.uniform(0.0, 360.0)))
    if out.kind == "position" and out.offset is not None:
        srect = _scaled_rect(out.scale, rect) if out.scale not in (None, 1.0) else rect
        ox, oy = out.offset
        if not (0.0 <= ox <= image.width - srect.w and 0.0 <= oy <= image.height - srect.h):
            raise ValidationError(
                f"position target {out.offset} outside [0, {image.width - srect.w}] x [0, {image.height - srect.h}]"
            )
    return out


def decompose(image: ImageGrid, mask: MaskGrid, spec: EditSpec, denoiser, t0_remove: int, rng: RngStream) -> SceneDecomposition:
    """Remove the object, then warp image and mask per the resolved edit.

    The warped mask is re-binarized: the transform moves pixels, it does not
    feather them, and a hard mask keeps the per-step blend exact.
    """
    bg = remove_object(image, mask, denoiser, t0_remove, rng)
    matrix = transform_matrix(spec, bbox(mask))
    hard = MaskGrid((warp_mask(mask, matrix).data > 0.5).astype(np.float64))
    return SceneDecomposition(bg, warp(image, matrix, fill=0.0), hard)


def apply_edit(
    image: ImageGrid,
    mask: MaskGrid,
    spec: EditSpec,
    denoiser,
    *,
    classifier=None,
    label: Optional[int] = None,
    pool: Optional[list[ImageGrid]] = None,
    hook=None,
) -> tuple[EditSpec, ImageGrid]:
    """Run one edit end to end; returns the resolved spec and the edited image."""
    rng = RngStream(spec.seed)
    if spec.kind == "background":
        if spec.mode == "random":
            return spec, random_background(image, mask, pool or [], denoiser, spec.t0, rng)
        if spec.mode == "template":
            bg = template_background(spec.template, spec.template_period, image.height, image.width, image.channels)
            return spec, composite_edit(SceneDecomposition(bg, image, mask), denoiser, spec.t0, rng)
        lam = 0.0 if spec.mode == "invert" else spec.lam
        if spec.adversarial and lam != 0.0:
            if classifier is None or label is None:
                raise ValidationError("adversarial background edit needs a classifier and label")
            objective = AdversarialObjective(classifier, label)
        else:
            objective = SpectralComplexity(spec.band, spec.cutoff)
        cfg = GuidanceConfig(lam=lam, t0=spec.t0, band=spec.band, cutoff=spec.cutoff)
        return spec, background_edit(image, mask, denoiser, objective, cfg, rng, hook=hook)

    resolved = resolve_edit(spec, image, mask, rng)
    decomp = decompose(image, mask, resolved, denoiser, resolved.t0, rng)
    return resolved, composite_edit(decomp, denoiser, resolved.t0, rng, hook=hook)


@dataclass
class SuiteConfig:
    """Everything generate_suite needs beyond the image and mask."""

    seed: int
    denoiser: object
    classifier: object = None
    label: Optional[int] = None
    pool: list = field(default_factory=list)
    t0_background: int = 50
    t0_object: int = 25
    lam: float = 20.0
    band: str = "all"
    cutoff: float = 0.5
    rd_on_small: bool = False


def suite_specs(config: SuiteConfig) -> list[tuple[str, EditSpec]]:
    """The 11 canonical edits, each seeded from (suite seed, variant name)."""
    base = RngStream(config.seed)

    def seed_for(name: str) -> int:
        return base.child(name).stream

    tb, to = config.t0_background, config.t0_object
    lam, band, cut = config.lam, config.band, config.cutoff
    specs = [
        ("inver", EditSpec("background", tb, seed_for("inver"), mode="invert", band=band, cutoff=cut)),
        ("bg-neg20", EditSpec("background", tb, seed_for("bg-neg20"), lam=-lam, band=band, cutoff=cut)),
        ("bg-pos20", EditSpec("background", tb, seed_for("bg-pos20"), lam=lam, band=band, cutoff=cut)),
        ("bg-adv20", EditSpec("background", tb, seed_for("bg-adv20"), lam=lam, adversarial=True, band=band, cutoff=cut)),
        ("bg-random", EditSpec("background", tb, seed_for("bg-random"), mode="random")),
        ("size-full", EditSpec("size", to, seed_for("size-full"), rate=FULL)),
        ("size-0.1", EditSpec("size", to, seed_for("size-0.1"), rate=0.1)),
        ("size-0.08", EditSpec("size", to, seed_for("size-0.08"), rate=0.08)),
        ("size-0.05", EditSpec("size", to, seed_for("size-0.05"), rate=0.05)),
        ("rp", EditSpec("position", to, seed_for("rp"), rate=POSITION_BASE_RATE)),
        (
            "rd",
            EditSpec("direction", to, seed_for("rd"), rate=POSITION_BASE_RATE if config.rd_on_small else None),
        ),
    ]
    return specs


def generate_suite(image: ImageGrid, mask: MaskGrid, config: SuiteConfig) -> list[tuple[str, ImageGrid]]:
    """All 11 named variants, deterministic under the suite seed."""
    return [(name, img) for name, _, img in resolved_suite(image, mask, config)]


def resolved_suite(image: ImageGrid, mask: MaskGrid, config: SuiteConfig) -> list[tuple[str, EditSpec, ImageGrid]]:
    """Like :func:`generate_suite` but also returns each resolved spec."""
    if mask.object_count() == 0:
        raise EmptyMask("suite generation needs a nonempty object mask")
    if config.classifier is None or config.label is None:
        raise ValidationError("suite generation needs a classifier and label for the adversarial variant")
    if not config.pool:
        raise EmptyPool("suite generation needs a background pool for the random variant")
    out = []
    for name, spec in suite_specs(config):
        resolved, img = apply_edit(
            image, mask, spec, config.denoiser,
            classifier=config.classifier, label=config.label, pool=config.pool,
        )
        out.append((name, resolved, img))
    return out
