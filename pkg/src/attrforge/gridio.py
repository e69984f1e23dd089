"""Image and grid file I/O.

PNG carries 8-bit quantized images ([-1, 1] mapped linearly to [0, 255],
clamped before quantizing) and single-channel masks (value >= 128 means
object). Raw grid dumps keep float32 intermediates losslessly under an
ASCII header line "ATTRFORGE-GRID v1 H W C".
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import IoError, ValidationError
from .grid import ImageGrid, MaskGrid

GRID_MAGIC = "ATTRFORGE-GRID"
GRID_VERSION = "v1"


def to_uint8(image: ImageGrid) -> np.ndarray:
    """Clamp to [-1, 1] and quantize to uint8."""
    scaled = (np.clip(image.data, -1.0, 1.0) + 1.0) * 127.5
    return np.round(scaled).astype(np.uint8)


def from_uint8(raw: np.ndarray) -> ImageGrid:
    return ImageGrid(raw.astype(np.float64) / 255.0 * 2.0 - 1.0)


def write_png(path, image: ImageGrid) -> None:
    arr = to_uint8(image)
    if image.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    elif image.channels == 3:
        pil = Image.fromarray(arr, mode="RGB")
    else:
        raise ValidationError(f"PNG supports 1 or 3 channels, got {image.channels}")
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_png(path) -> ImageGrid:
    try:
        with Image.open(path) as pil:
            if pil.mode not in ("L", "RGB"):
                pil = pil.convert("RGB" if pil.mode not in ("1", "I", "I;16", "LA") else "L")
            arr = np.asarray(pil, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return from_uint8(arr)


def write_mask_png(path, mask: MaskGrid) -> None:
    arr = np.round(np.clip(mask.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(arr, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_mask_png(path) -> MaskGrid:
    try:
        with Image.open(path) as pil:
            if pil.mode != "L":
                pil = pil.convert("L")
            arr = np.asarray(pil, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return MaskGrid(arr.astype(np.float64) / 255.0)


def write_grid(path, image: ImageGrid) -> None:
    """Raw float32 dump, little endian, row-major (H, W, C)."""
    header = f"{GRID_MAGIC} {GRID_VERSION} {image.height} {image.width} {image.channels}\n"
    payload = image.data.astype("<f4").tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_grid(path) -> ImageGrid:
    try:
        with open(path, "rb") as fh:
            header = fh.readline().decode("ascii", errors="replace").strip()
            parts = header.split()
            if len(parts) != 5 or parts[0] != GRID_MAGIC or parts[1] != GRID_VERSION:
                raise IoError(f"{path}: bad grid header {header!r}")
            h, w, c = (int(p) for p in parts[2:])
            payload = fh.read(h * w * c * 4)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(payload) != h * w * c * 4:
        raise IoError(f"{path}: truncated grid payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    return ImageGrid(arr.astype(np.float64))
