"""Raster, spectrum, and geometry primitives.

Images are dense H x W x C float64 arrays with a canonical intensity range
of [-1, 1]; masks are H x W floats clamped to [0, 1]. Coordinates follow
p = [x, y, 1]^T with x = column, y = row, origin at the top-left pixel
center.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, SingularTransform, ValidationError


class ImageGrid:
    """H x W x C raster of real intensities."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValidationError(f"image data must be HxW or HxWxC, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValidationError(f"degenerate image shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite values")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, height, width, channels=1):
        return cls(np.zeros((height, width, channels)))

    @classmethod
    def full(cls, height, width, value, channels=1):
        return cls(np.full((height, width, channels), float(value)))

    def gray(self) -> np.ndarray:
        """Channel-mean H x W view of the image."""
        return self.data.mean(axis=2)

    def clamp(self, lo=-1.0, hi=1.0) -> "ImageGrid":
        return ImageGrid(np.clip(self.data, lo, hi))

    def __repr__(self):
        return f"ImageGrid({self.height}x{self.width}x{self.channels})"


class MaskGrid:
    """H x W soft object mask; values clamped to [0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValidationError(f"mask data must be HxW, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("mask contains non-finite values")
        self.data = np.clip(arr, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def object_pixels(self) -> np.ndarray:
        """Boolean H x W array of pixels counted as object (M > 0.5)."""
        return self.data > 0.5

    def object_count(self) -> int:
        return int(np.count_nonzero(self.object_pixels()))

    def __repr__(self):
        return f"MaskGrid({self.height}x{self.width}, N_o={self.object_count()})"


class Spectrum:
    """Complex coefficients of the unnormalized per-channel 2-D DFT."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValidationError(f"spectrum data must be HxWxC, got shape {arr.shape}")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def amplitude(self) -> np.ndarray:
        return np.abs(self.data)


@dataclass(frozen=True)
class ObjectRect:
    """Axis-aligned rectangle (x = column, y = row, width, height)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"rectangle must have positive extent, got {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def inside(self, width: int, height: int, margin: int = 0) -> bool:
        return (
            self.x >= margin
            and self.y >= margin
            and self.x + self.w <= width - margin
            and self.y + self.h <= height - margin
        )


class AffineMatrix:
    """3x3 homogeneous transform; bottom row fixed to [0, 0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.shape != (3, 3):
            raise ValidationError(f"affine matrix must be 3x3, got {arr.shape}")
        if not np.allclose(arr[2], [0.0, 0.0, 1.0], atol=1e-12):
            raise ValidationError(f"bottom row must be [0, 0, 1], got {arr[2]}")
        det = arr[0, 0] * arr[1, 1] - arr[0, 1] * arr[1, 0]
        if abs(det) <= 1e-12:
            raise SingularTransform(f"2x2 block is singular (det={det:g})")
        arr = arr.copy()
        arr[2] = [0.0, 0.0, 1.0]
        self.data = arr

    @classmethod
    def identity(cls) -> "AffineMatrix":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineMatrix":
        m = np.eye(3)
        m[0, 2] = dx
        m[1, 2] = dy
        return cls(m)

    @classmethod
    def scaling(cls, s: float, dx: float = 0.0, dy: float = 0.0) -> "AffineMatrix":
        return cls([[s, 0.0, dx], [0.0, s, dy], [0.0, 0.0, 1.0]])

    @classmethod
    def rotation_deg(cls, theta: float) -> "AffineMatrix":
        # Matches the editing convention: [x', y'] = [x cos + y sin, -x sin + y cos].
        r = np.deg2rad(theta)
        c, s = np.cos(r), np.sin(r)
        return cls([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def compose(self, other: "AffineMatrix") -> "AffineMatrix":
        """self after other: (self.compose(other))(p) = self(other(p))."""
        return AffineMatrix(self.data @ other.data)

    def inverse(self) -> "AffineMatrix":
        return AffineMatrix(np.linalg.inv(self.data))

    def apply(self, xs, ys):
        """Map coordinate arrays (x, y) through the transform."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        m = self.data
        return m[0, 0] * xs + m[0, 1] * ys + m[0, 2], m[1, 0] * xs + m[1, 1] * ys + m[1, 2]

    def __repr__(self):
        return f"AffineMatrix({self.data.tolist()})"


class RngStream:
    """Deterministic random stream keyed by (seed, stream id).

    Identical (seed, stream) pairs replay the same draw sequence; distinct
    stream ids give statistically independent sequences. Child streams
    derive their id from a stable hash so suite variants can fan out
    reproducibly.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, label) -> "RngStream":
        """Independent stream derived from (seed, stream, label).

        The label hash mixes in the seed so a child's stream id is itself
        usable as a derived seed.
        """
        digest = hashlib.sha256(f"{self.seed}/{self.stream}/{label}".encode("utf-8")).digest()
        child_id = int.from_bytes(digest[:8], "little")
        return RngStream(self.seed, child_id)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def normal_like(self, grid: ImageGrid) -> ImageGrid:
        return ImageGrid(self._gen.standard_normal(grid.shape))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def fft2(image: ImageGrid) -> Spectrum:
    """Unnormalized forward 2-D DFT of each channel.

    The DC coefficient (0, 0) equals the per-channel pixel sum.
    """
    return Spectrum(np.fft.fft2(image.data, axes=(0, 1)))


def ifft2(spectrum: Spectrum) -> ImageGrid:
    """Inverse of :func:`fft2`; returns the real part."""
    return ImageGrid(np.fft.ifft2(spectrum.data, axes=(0, 1)).real)


def warp(image: ImageGrid, transform: AffineMatrix, fill: float = 0.0) -> ImageGrid:
    """Resample the image under the forward transform.

    Each output pixel q takes the bilinear sample of the input at
    transform^{-1} q; samples falling outside the source take `fill`.
    """
    inv = transform.inverse().data
    h, w = image.height, image.width
    ys, xs = np.mgrid[0:h, 0:w]
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]

    inside = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
    sxc = np.clip(sx, 0.0, w - 1.0)
    syc = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sxc).astype(np.intp)
    y0 = np.floor(syc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sxc - x0
    fy = syc - y0

    src = image.data
    out = (
        src[y0, x0] * ((1 - fy) * (1 - fx))[:, :, None]
        + src[y0, x1] * ((1 - fy) * fx)[:, :, None]
        + src[y1, x0] * (fy * (1 - fx))[:, :, None]
        + src[y1, x1] * (fy * fx)[:, :, None]
    )
    out = np.where(inside[:, :, None], out, float(fill))
    return ImageGrid(out)


def warp_mask(mask: MaskGrid, transform: AffineMatrix) -> MaskGrid:
    """Warp a mask with the same bilinear kernel, fill 0, re-clamped."""
    warped = warp(ImageGrid(mask.data), transform, fill=0.0)
    return MaskGrid(warped.data[:, :, 0])


def bbox(mask: MaskGrid) -> ObjectRect:
    """Tight axis-aligned rectangle over pixels with M > 0.5."""
    on = mask.object_pixels()
    rows = np.any(on, axis=1)
    cols = np.any(on, axis=0)
    if not rows.any():
        raise EmptyMask("no pixel exceeds the 0.5 object threshold")
    y0, y1 = np.flatnonzero(rows)[[0, -1]]
    x0, x1 = np.flatnonzero(cols)[[0, -1]]
    return ObjectRect(x=int(x0), y=int(y0), w=int(x1 - x0 + 1), h=int(y1 - y0 + 1))


def pixel_rate(mask: MaskGrid) -> float:
    """Fraction of pixels counted as object: count(M > 0.5) / (H * W)."""
    return mask.object_count() / float(mask.height * mask.width)
