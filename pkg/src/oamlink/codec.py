"""Grayscale images as bit-plane channels, link metrics and binary PGM I/O."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .txarray import BitMatrix


class CodecError(ValueError):
    pass


class PgmError(CodecError):
    pass


class PgmFormatError(PgmError):
    """Bad magic number or header fields."""


class PgmTruncatedError(PgmError):
    """Raster shorter than width * height bytes."""


class PgmDepthError(PgmError):
    """maxval other than 255."""


@dataclass
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)  # (height, width) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.size != self.width * self.height:
            raise CodecError(f"{px.size} pixels for a {self.width}x{self.height} image")
        if px.size and (px.min() < 0 or px.max() > 255):
            raise CodecError("pixel values must lie in 0..255")
        self.pixels = px.astype(np.uint8).reshape(self.height, self.width)

    def __eq__(self, other):
        return (isinstance(other, GrayImage) and self.width == other.width
                and self.height == other.height and np.array_equal(self.pixels, other.pixels))


def image_to_bits(img: GrayImage, n_channels: int = 8, msb_first: bool = True) -> BitMatrix:
    """Bit plane k of the row-major pixels becomes channel k."""
    if n_channels != 8:
        raise CodecError(f"an 8-bit image needs 8 channels, got {n_channels}")
    flat = img.pixels.reshape(-1)
    planes = np.unpackbits(flat[None, :], axis=0, bitorder="big" if msb_first else "little")
    return BitMatrix(planes)


def bits_to_image(bits: BitMatrix, width: int, height: int, msb_first: bool = True) -> GrayImage:
    """Inverse of :func:`image_to_bits`; erased channels contribute 0 bits."""
    if bits.n_channels != 8:
        raise CodecError(f"need 8 bit-plane channels, got {bits.n_channels}")
    data = bits.payload
    if data.shape[1] != width * height:
        raise CodecError(f"{data.shape[1]} symbols for a {width}x{height} image")
    data = data.copy()
    for q in bits.erased:
        data[q] = 0
    flat = np.packbits(data, axis=0, bitorder="big" if msb_first else "little")[0]
    return GrayImage(width, height, flat.reshape(height, width))


@dataclass
class LinkReport:
    per_channel_ber: list
    aggregate_ber: float
    bit_errors: int
    total_bits: int
    pixel_errors: int
    erased_channels: tuple = ()
    snr_db: float | None = None
    geometry: str = ""
    spectral_efficiency: int = 0  # payload bits per symbol
    runtime: float = 0.0


def ber(sent: BitMatrix, received: BitMatrix) -> LinkReport:
    """Bit-error ratios per channel and overall; a pixel error is any differing column."""
    a, b = sent.payload, received.payload
    if a.shape != b.shape:
        raise CodecError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a != b
    errors = int(diff.sum())
    return LinkReport(
        per_channel_ber=[float(x) for x in diff.mean(axis=1)],
        aggregate_ber=errors / diff.size,
        bit_errors=errors,
        total_bits=int(diff.size),
        pixel_errors=int(diff.any(axis=0).sum()),
        erased_channels=tuple(received.erased),
        spectral_efficiency=a.shape[0],
    )


def _tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens, skipping # comments.

    Returns the tokens and the raster offset (one whitespace byte after the last).
    """
    out, i, n = [], 0, len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise PgmFormatError("header ended early")
        out.append(data[i:j])
        i = j
    if i >= n or not data[i:i + 1].isspace():
        raise PgmFormatError("missing whitespace after maxval")
    return out, i + 1


def decode_pgm(data: bytes) -> GrayImage:
    if data[:2] != b"P5":
        raise PgmFormatError(f"not a binary PGM (magic {data[:2]!r})")
    toks, offset = _tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise PgmFormatError(f"non-integer header field: {exc}") from None
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmDepthError(f"maxval {maxval} unsupported (need 255)")
    raster = data[offset:offset + width * height]
    if len(raster) < width * height:
        raise PgmTruncatedError(f"raster has {len(raster)} of {width * height} bytes")
    return GrayImage(width, height, np.frombuffer(raster, dtype=np.uint8))


def encode_pgm(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        return decode_pgm(f.read())


def write_pgm(img: GrayImage, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_pgm(img))


def synthetic_image(size: int = 64) -> GrayImage:
    """Diagonal gradient with an 8-pixel checker overlay; exercises every bit plane."""
    y, x = np.mgrid[0:size, 0:size]
    grad = (x + y) * 255 // max(2 * size - 2, 1)
    checker = ((x // 8 + y // 8) % 2) * 85
    return GrayImage(size, size, ((grad + checker) % 256).astype(np.uint8))


def load_image(source) -> GrayImage:
    """Read a PGM path, or build ``synthetic`` / ``synthetic:N`` test images."""
    s = os.fspath(source)
    if s == "synthetic":
        return synthetic_image(64)
    if s.startswith("synthetic:"):
        return synthetic_image(int(s.split(":", 1)[1]))
    return read_pgm(s)
