"""Binary PNM input/output plus the small sidecar formats used by the CLI.

Only binary P5 (grayscale) and P6 (RGB) with one-byte samples are
supported.  Parsing is strict: malformed headers, short payloads, and
trailing bytes are all rejected with the byte offset of the problem, so a
bad file never silently truncates into a valid-looking image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_WHITESPACE = b" \t\r\n\x0b\x0c"


class PnmParseError(ValueError):
    """Malformed PNM data; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class RasterImage:
    """Decoded raster: uint8 pixels shaped (h, w) or (h, w, 3)."""

    pixels: np.ndarray
    maxval: int = 255

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError("pixels must be (h, w) or (h, w, 3)")
        object.__setattr__(self, "pixels", arr)
        if not 1 <= self.maxval <= 255:
            raise ValueError("maxval out of range")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def is_gray(self) -> bool:
        return self.pixels.ndim == 2

    def samples(self) -> np.ndarray:
        """Pixels flattened to (n, channels) in raster order, int64."""
        flat = self.pixels.reshape(self.height * self.width, self.channels)
        return flat.astype(np.int64)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        b = data[pos]
        if b in _WHITESPACE:
            pos += 1
        elif b == 0x23:  # '#' comment runs to end of line
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise PnmParseError("truncated header", pos)
    start = pos
    while pos < n and data[pos] not in _WHITESPACE:
        pos += 1
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _next_token(data, pos)
    if not token.isdigit():
        raise PnmParseError(f"non-numeric {what} {token!r}", end - len(token))
    return int(token), end


def read_pnm(path) -> RasterImage:
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise PnmParseError(f"unsupported magic {magic!r}", 0)
    width, pos = _header_int(data, 2, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PnmParseError("image dimensions must be positive", 2)
    if not 1 <= maxval <= 255:
        raise PnmParseError(f"unsupported maxval {maxval}", pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PnmParseError("missing whitespace before payload", pos)
    pos += 1
    expected = width * height * channels
    payload = data[pos:]
    if len(payload) < expected:
        raise PnmParseError(
            f"payload has {len(payload)} bytes, needs {expected}", len(data)
        )
    if len(payload) > expected:
        raise PnmParseError("trailing bytes after payload", pos + expected)
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    pixels = arr.reshape(shape)
    if maxval < 255 and int(pixels.max(initial=0)) > maxval:
        raise PnmParseError("sample exceeds declared maxval", pos)
    return RasterImage(pixels.copy(), maxval)


def write_pnm(path, image: RasterImage) -> None:
    magic = "P5" if image.is_gray else "P6"
    header = f"{magic}\n{image.width} {image.height}\n{image.maxval}\n"
    Path(path).write_bytes(header.encode("ascii") + image.pixels.tobytes())


def round_half_even(num: int, den: int) -> int:
    """Exact nearest-integer rounding of num/den, ties to even.

    den must be positive; num may be any integer.
    """
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q % 2 != 0):
        q += 1
    return q


def render_approximation(labels: np.ndarray, stats_by_label, channels: int, maxval: int = 255) -> RasterImage:
    """Paint every pixel with its cluster mean, rounded to a byte.

    Integer statistics round exactly (half to even); float statistics go
    through Python's round, which applies the same tie rule.
    """
    labels = np.asarray(labels)
    height, width = labels.shape
    lut = {}
    for label, st in stats_by_label.items():
        if st.is_integer():
            vals = tuple(round_half_even(int(s), st.n) for s in st.s)
        else:
            vals = tuple(int(round(s / st.n)) for s in st.s)
        vals = tuple(min(max(v, 0), maxval) for v in vals)
        lut[int(label)] = vals
    flat = labels.ravel()
    out = np.empty((flat.size, channels), dtype=np.uint8)
    for label, vals in lut.items():
        out[flat == label] = vals
    shape = (height, width) if channels == 1 else (height, width, 3)
    return RasterImage(out.reshape(shape), maxval)


def _format_error(e: float) -> str:
    if e == int(e):
        return str(int(e))
    return repr(e)


def write_series(path, series) -> None:
    """Error series as bare CSV lines ``g,E`` in ascending g."""
    lines = [f"{g},{_format_error(e)}" for g, e in series.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


_LABEL_MAGIC = b"LBL1"


def write_labels(path, labels: np.ndarray) -> None:
    """Label map sidecar: magic, u32 w and h, then row-major u32 labels."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    if labels.min(initial=0) < 0:
        raise ValueError("labels must be non-negative")
    height, width = labels.shape
    blob = _LABEL_MAGIC + struct.pack("<II", width, height)
    Path(path).write_bytes(blob + labels.astype("<u4").tobytes())


def read_labels(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != _LABEL_MAGIC:
        raise ValueError("not a label sidecar")
    width, height = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * width * height
    if len(data) != expected:
        raise ValueError("label sidecar size mismatch")
    arr = np.frombuffer(data[12:], dtype="<u4").reshape(height, width)
    return arr.astype(np.int32)
