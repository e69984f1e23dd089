import numpy as np
import pytest

from attrforge.errors import IoError
from attrforge.grid import ImageGrid, MaskGrid, RngStream
from attrforge.gridio import (
    read_grid,
    read_mask_png,
    read_png,
    write_grid,
    write_mask_png,
    write_png,
)


def test_png_roundtrip_quantization(tmp_path):
    img = ImageGrid(np.clip(RngStream(1).normal((9, 7, 3)) * 0.4, -1, 1))
    path = tmp_path / "x.png"
    write_png(path, img)
    back = read_png(path)
    assert back.shape == img.shape
    assert np.abs(back.data - img.data).max() <= 1.0 / 255.0 + 1e-9


def test_png_gray_channel(tmp_path):
    img = ImageGrid.full(5, 5, 0.25)
    path = tmp_path / "g.png"
    write_png(path, img)
    back = read_png(path)
    assert back.channels == 1
    assert np.abs(back.data - 0.25).max() <= 1.0 / 255.0


def test_png_write_clamps(tmp_path):
    img = ImageGrid(np.array([[[3.0]], [[-3.0]]]))
    path = tmp_path / "c.png"
    write_png(path, img)
    back = read_png(path)
    assert back.data.max() == pytest.approx(1.0)
    assert back.data.min() == pytest.approx(-1.0)


def test_mask_png_threshold_semantics(tmp_path):
    m = np.zeros((4, 4))
    m[0, 0] = 128 / 255.0
    m[0, 1] = 127 / 255.0
    path = tmp_path / "m.png"
    write_mask_png(path, MaskGrid(m))
    back = read_mask_png(path)
    on = back.object_pixels()
    assert on[0, 0] and not on[0, 1]
    assert back.object_count() == 1


def test_grid_dump_roundtrip_float32_exact(tmp_path):
    img = ImageGrid(RngStream(5).normal((6, 8, 2)))
    path = tmp_path / "x.grid"
    write_grid(path, img)
    back = read_grid(path)
    assert np.array_equal(back.data, img.data.astype(np.float32).astype(np.float64))
    header = path.read_bytes().split(b"\n", 1)[0]
    assert header == b"ATTRFORGE-GRID v1 6 8 2"


def test_grid_bad_header(tmp_path):
    path = tmp_path / "bad.grid"
    path.write_bytes(b"NOT-A-GRID v9 1 1 1\n\x00\x00\x00\x00")
    with pytest.raises(IoError):
        read_grid(path)


def test_grid_truncated(tmp_path):
    path = tmp_path / "short.grid"
    path.write_bytes(b"ATTRFORGE-GRID v1 2 2 1\n\x00\x00\x00\x00")
    with pytest.raises(IoError):
        read_grid(path)


def test_missing_file():
    with pytest.raises(IoError):
        read_png("/nonexistent/nope.png")
    with pytest.raises(IoError):
        read_grid("/nonexistent/nope.grid")
