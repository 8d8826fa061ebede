"""Image file IO: binary PGM (P5) and 8-bit PNG.

Byte values map to reals as v = byte / 255 exactly; writes round to the
nearest byte (halves up).
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .raster import Image


class ImageFormatError(ValueError):
    """Raised for unreadable or malformed image files."""


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.floor(values * 255.0 + 0.5).astype(np.uint8)


def read_pgm(path: str | Path) -> Image:
    """Read a binary (P5) 8-bit PGM file."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise ImageFormatError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            tokens.append(int(data[start:pos]))
        else:
            raise ImageFormatError(f"{path}: malformed PGM header")
    width, height, maxval = tokens
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: PGM raster truncated")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width) / 255.0
    return Image(pixels=pixels[..., np.newaxis])


def pgm_bytes(image: Image) -> bytes:
    """Encode a single-channel image as binary (P5) 8-bit PGM."""
    if image.channels != 1:
        raise ValueError("PGM output requires a single-channel image")
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + _to_bytes(image.pixels[..., 0]).tobytes()


def write_pgm(image: Image, path: str | Path) -> None:
    Path(path).write_bytes(pgm_bytes(image))


def read_png(path: str | Path) -> Image:
    """Read an 8-bit grayscale or RGB PNG."""
    try:
        with PILImage.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: cannot read PNG ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[..., np.newaxis]
    return Image(pixels=arr / 255.0)


def png_bytes(image: Image) -> bytes:
    """Encode an image as 8-bit grayscale or RGB PNG."""
    data = _to_bytes(image.pixels)
    if image.channels == 1:
        pil = PILImage.fromarray(data[..., 0], mode="L")
    else:
        pil = PILImage.fromarray(data, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def write_png(image: Image, path: str | Path) -> None:
    Path(path).write_bytes(png_bytes(image))


def read_image(path: str | Path) -> Image:
    """Read PGM or PNG, dispatching on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise ImageFormatError(f"{path}: unsupported image format '{suffix}'")


def render_gray(values: np.ndarray) -> Image:
    """Min-max map an arbitrary real 2D array into a single-channel image."""
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if hi - lo == 0.0:
        scaled = np.zeros_like(values)
    else:
        scaled = (values - lo) / (hi - lo)
    return Image(pixels=scaled[..., np.newaxis])
