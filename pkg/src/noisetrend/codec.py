"""Bit-exact image file IO.

Native formats are the binary portable graymap/pixmap:

* ``P5`` (graymap, 1 channel) and ``P6`` (pixmap, 3 channels),
* maxval 255 (one byte per sample) or 65535 (two bytes, big-endian),
* canonical header written by :func:`write_image` is
  ``P5\\n<width> <height>\\n<maxval>\\n`` followed by the raster.

Sample values map to intensities as ``v / maxval`` (so 8-bit ``v/255`` and
16-bit ``v/65535``); writing rounds ``clip(value, 0, 1) * maxval``.  A file
written by :func:`write_image` reads back to the identical array, and
re-writing that image reproduces the file byte for byte.

PNG reading is an optional convenience for external datasets and needs
Pillow; it is not part of the bit-exact contract.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DecodeError, FormatError
from .image import Image

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _skip_header_space(buf: bytes, pos: int) -> int:
    # Netpbm header whitespace, including '#' comments running to end of line.
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    return pos


def _read_header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_header_space(buf, pos)
    start = pos
    while pos < len(buf) and buf[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise DecodeError(f"expected {what}", start)
    return int(buf[start:pos]), pos


def parse_netpbm_header(buf: bytes) -> tuple[int, int, int, int, int]:
    """Parse a P5/P6 header; returns (channels, width, height, maxval, data offset)."""
    if len(buf) < 2:
        raise DecodeError("file too short for magic number", 0)
    magic = buf[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"unsupported format magic {magic!r}")
    width, pos = _read_header_int(buf, 2, "width")
    height, pos = _read_header_int(buf, pos, "height")
    maxval, pos = _read_header_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise DecodeError(f"degenerate raster dimensions {width}x{height}", 2)
    if not 1 <= maxval <= 65535:
        raise DecodeError(f"maxval {maxval} out of range 1..65535", pos)
    if pos >= len(buf):
        raise DecodeError("missing whitespace after maxval", pos)
    if buf[pos : pos + 1] not in b" \t\r\n":
        raise DecodeError("expected single whitespace after maxval", pos)
    return channels, width, height, maxval, pos + 1


def read_header(path: str | Path) -> tuple[int, int, int]:
    """Geometry (height, width, channels) of a native file without decoding the raster."""
    path = Path(path)
    buf = path.read_bytes()
    if buf[:8] == _PNG_MAGIC:
        img = _read_png(path)
        return img.geometry
    channels, width, height, _, _ = parse_netpbm_header(buf)
    return height, width, channels


def read_image(path: str | Path) -> Image:
    """Decode a native P5/P6 file (or a PNG when Pillow is available)."""
    path = Path(path)
    buf = path.read_bytes()
    if buf[:8] == _PNG_MAGIC:
        return _read_png(path)
    channels, width, height, maxval, offset = parse_netpbm_header(buf)
    sample_bytes = 2 if maxval > 255 else 1
    expected = width * height * channels * sample_bytes
    raster = buf[offset : offset + expected]
    if len(raster) < expected:
        raise DecodeError(
            f"truncated raster: expected {expected} bytes, found {len(raster)}",
            offset + len(raster),
        )
    dtype = ">u2" if sample_bytes == 2 else np.uint8
    samples = np.frombuffer(raster, dtype=dtype).astype(np.float64)
    data = samples.reshape(height, width, channels) / float(maxval)
    return Image(data)


def write_image(image: Image, path: str | Path, bit_depth: int = 16) -> None:
    """Encode to the canonical P5/P6 form; ``bit_depth`` is 8 or 16."""
    if bit_depth not in (8, 16):
        raise ConfigurationError(f"bit depth must be 8 or 16, got {bit_depth}")
    maxval = 255 if bit_depth == 8 else 65535
    magic = "P5" if image.channels == 1 else "P6"
    header = f"{magic}\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    quantized = np.round(np.clip(image.data, 0.0, 1.0) * maxval)
    raster = quantized.astype(np.uint8 if bit_depth == 8 else ">u2").tobytes()
    Path(path).write_bytes(header + raster)


def _read_png(path: Path) -> Image:
    try:
        from PIL import Image as PILImage
    except ImportError as exc:
        raise FormatError("PNG support requires Pillow (pip install noisetrend[png])") from exc
    with PILImage.open(path) as img:
        mode = img.mode
        if mode not in ("L", "I;16", "I;16B", "I", "RGB"):
            img = img.convert("RGB")
            mode = "RGB"
        arr = np.asarray(img)
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype in (np.uint16, np.int32):
        scale = 65535.0
    else:
        raise FormatError(f"unsupported PNG sample type {arr.dtype}")
    data = arr.astype(np.float64) / scale
    return Image(data)
