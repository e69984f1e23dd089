"""Procedural labeled scenes for desk-scale evaluation.

Four classes of objects, distinct in intensity level and shape, placed on
varied mid-gray backgrounds (constant, gradient, or lightly noisy). Solid
intensities survive resampling, so a pixel-feature classifier degrades
gradually as objects shrink instead of collapsing outright. Everything is
generated from an RngStream, so the repo ships no data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ImageGrid, MaskGrid, RngStream

TOY_CLASS_NAMES = ("bright-square", "light-disk", "dusk-square", "dark-disk")
_CLASS_LEVELS = (0.85, 0.35, -0.35, -0.85)


@dataclass(frozen=True)
class ToyScene:
    image: ImageGrid
    mask: MaskGrid
    label: int


def _background(rng: RngStream, size: int) -> np.ndarray:
    kind = int(rng.integers(0, 4))
    level = float(rng.uniform(-0.2, 0.2))
    ys, xs = np.mgrid[0:size, 0:size]
    u = xs / max(size - 1, 1) - 0.5
    v = ys / max(size - 1, 1) - 0.5
    if kind == 0:
        bg = np.full((size, size), level)
    elif kind == 1:
        sx = float(rng.uniform(-0.25, 0.25))
        sy = float(rng.uniform(-0.25, 0.25))
        bg = level + sx * u + sy * v
    elif kind == 2:
        sy = float(rng.uniform(-0.25, 0.25))
        bg = level + sy * v
    else:
        # radial bump or dip centered at a random spot
        cx = float(rng.uniform(-0.3, 0.3))
        cy = float(rng.uniform(-0.3, 0.3))
        amp = float(rng.uniform(-0.25, 0.25))
        r2 = (u - cx) ** 2 + (v - cy) ** 2
        bg = level + amp * np.exp(-r2 / 0.08)
    sigma = float(rng.uniform(0.01, 0.05))
    bg = bg + sigma * rng.normal((size, size))
    return np.clip(bg, -0.5, 0.5)


def _object_patch(label: int, side: int):
    """(texture, footprint) for one object, both side x side."""
    ys, xs = np.mgrid[0:side, 0:side]
    if label % 2 == 0:
        footprint = np.ones((side, side), dtype=bool)
    else:
        c = (side - 1) / 2.0
        footprint = (ys - c) ** 2 + (xs - c) ** 2 <= (side / 2.0) ** 2
    texture = np.full((side, side), _CLASS_LEVELS[label])
    return texture, footprint


def toy_scene(
    rng: RngStream,
    size: int = 32,
    num_classes: int = 4,
    rate_range: tuple[float, float] = (0.12, 0.3),
    centered: bool = False,
    label: int | None = None,
) -> ToyScene:
    """One labeled scene; the object is fully contained in the frame."""
    if not (2 <= num_classes <= len(TOY_CLASS_NAMES)):
        raise ValueError(f"num_classes must lie in [2, {len(TOY_CLASS_NAMES)}]")
    if label is None:
        label = int(rng.integers(0, num_classes))
    bg = _background(rng, size)
    rate = float(rng.uniform(*rate_range))
    side = int(np.clip(round(np.sqrt(rate * size * size)), 4, size - 4))
    texture, footprint = _object_patch(label, side)
    if centered:
        y0 = x0 = (size - side) // 2
    else:
        y0 = int(rng.integers(1, size - side - 1))
        x0 = int(rng.integers(1, size - side - 1))
    img = bg.copy()
    img[y0 : y0 + side, x0 : x0 + side][footprint] = texture[footprint]
    mask = np.zeros((size, size))
    mask[y0 : y0 + side, x0 : x0 + side][footprint] = 1.0
    return ToyScene(ImageGrid(img[:, :, None]), MaskGrid(mask), label)


def toy_dataset(
    n: int,
    seed: int,
    size: int = 32,
    num_classes: int = 4,
    rate_range: tuple[float, float] = (0.12, 0.3),
    centered: bool = False,
) -> list[ToyScene]:
    """n deterministic scenes with labels cycled for class balance."""
    base = RngStream(seed)
    scenes = []
    for i in range(n):
        rng = base.child(f"scene-{i}")
        scenes.append(
            toy_scene(rng, size=size, num_classes=num_classes, rate_range=rate_range,
                      centered=centered, label=i % num_classes)
        )
    return scenes


def toy_backgrounds(n: int, seed: int, size: int = 32) -> list[ImageGrid]:
    """Object-free backgrounds; the natural atom set for an empirical denoiser."""
    base = RngStream(seed)
    return [ImageGrid(_background(base.child(f"bg-{i}"), size)[:, :, None]) for i in range(n)]


def noise_images(n: int, seed: int, size: int = 32, channels: int = 1) -> list[ImageGrid]:
    """Uniform noise images for OOD separation checks."""
    base = RngStream(seed)
    return [
        ImageGrid(base.child(f"noise-{i}").uniform(-1.0, 1.0, (size, size, channels)))
        for i in range(n)
    ]
