"""Gray images, angle vectors and decoded measurement distributions.

Pixel i of a 2^n x 2^n image sits at row i // 2^n, column i % 2^n.  A data
distribution has 2^(2n+1) entries indexed by ``gray_bit * 4^n + i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ImageError(ValueError):
    pass


class NotPGM(ImageError):
    pass


class NonSquare(ImageError):
    pass


class SideNotPowerOfTwo(ImageError):
    pass


class MaxvalNot255(ImageError):
    pass


class Truncated(ImageError):
    pass


class NonEncodable(ImageError):
    pass


class IncompatibleSides(ImageError):
    pass


class SideMismatch(ImageError):
    pass


class ZeroMassWarning(UserWarning):
    pass


class Mode(str, Enum):
    LINEAR = "linear"
    ARCSIN = "arcsin"


class Decode(str, Enum):
    RATIO = "ratio"
    SCALED = "scaled"


def _exponent(side: int) -> int:
    if side < 1 or side & (side - 1):
        raise SideNotPowerOfTwo(f"side {side} is not a power of two")
    n = side.bit_length() - 1
    if n < 1:
        raise NonEncodable("a 1x1 image has no position qubits")
    return n


@dataclass(frozen=True)
class Image:
    side: int
    pixels: np.ndarray  # uint8, flat, row-major

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.size and (px.min() < 0 or px.max() > 255):
            raise NonEncodable("pixel values must lie in [0, 255]")
        if np.issubdtype(px.dtype, np.floating) and not np.all(px == np.round(px)):
            raise NonEncodable("pixel values must be integers")
        px = px.astype(np.uint8).reshape(-1)
        if px.size != self.side * self.side:
            raise NonSquare(f"{px.size} pixels do not fill a {self.side}x{self.side} image")
        _exponent(self.side)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def n(self) -> int:
        return self.side.bit_length() - 1

    @classmethod
    def from_list(cls, values) -> "Image":
        values = np.asarray(values)
        side = math.isqrt(values.size)
        if side * side != values.size:
            raise NonSquare(f"{values.size} pixels do not form a square")
        return cls(side, values)

    def as_array(self) -> np.ndarray:
        return self.pixels.reshape(self.side, self.side)

    def __eq__(self, other):
        return (isinstance(other, Image) and self.side == other.side
                and np.array_equal(self.pixels, other.pixels))

    __hash__ = None


# PGM -------------------------------------------------------------------------

def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise Truncated("header ends early")
        out.append(data[start:pos])
    return out, pos


def parse_pgm(data: bytes) -> Image:
    magic = data[:2]
    if magic not in (b"P5", b"P2") or len(data) < 3 or not data[2:3].isspace():
        raise NotPGM("missing P5/P2 magic number")
    toks, pos = _tokens(data, 3, 2)
    try:
        w, h, maxval = (int(t) for t in toks)
    except ValueError as exc:
        raise NotPGM("malformed header") from exc
    if maxval != 255:
        raise MaxvalNot255(f"maxval is {maxval}")
    if w != h:
        raise NonSquare(f"image is {w}x{h}")
    _exponent(w)
    if magic == b"P5":
        body = data[pos + 1:pos + 1 + w * h]
        if len(body) < w * h:
            raise Truncated(f"expected {w * h} pixel bytes, found {len(body)}")
        px = np.frombuffer(body, dtype=np.uint8)
    else:
        vals = data[pos:].split()
        if len(vals) < w * h:
            raise Truncated(f"expected {w * h} pixel values, found {len(vals)}")
        try:
            px = np.array([int(v) for v in vals[:w * h]])
        except ValueError as exc:
            raise NotPGM("non-numeric pixel value") from exc
        if px.min() < 0 or px.max() > 255:
            raise NotPGM("pixel value above maxval")
    return Image(w, px.copy())


def load_pgm(path) -> Image:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def dump_pgm(image: Image) -> bytes:
    return f"P5\n{image.side} {image.side}\n255\n".encode() + image.pixels.tobytes()


def save_pgm(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_pgm(image))


# resampling ------------------------------------------------------------------

def round_half_up(v) -> np.ndarray:
    return np.floor(np.asarray(v, dtype=float) + 0.5)


def downscale(image: Image, target_side: int) -> Image:
    """Box-average pooling to ``target_side``."""
    if target_side < 2 or target_side & (target_side - 1):
        raise IncompatibleSides(f"target side {target_side} is not a power of two >= 2")
    if target_side > image.side or image.side % target_side:
        raise IncompatibleSides(f"cannot shrink {image.side} to {target_side}")
    f = image.side // target_side
    blocks = image.as_array().astype(float).reshape(target_side, f, target_side, f)
    return Image(target_side, round_half_up(blocks.mean(axis=(1, 3))).astype(np.uint8))


# encoding and decoding -------------------------------------------------------

def gray_to_angles(image: Image, mode=Mode.LINEAR) -> np.ndarray:
    v = image.pixels.astype(float) / 255.0
    if Mode(mode) is Mode.LINEAR:
        return v * (np.pi / 2)
    return np.arcsin(v)


def angles_to_gray(thetas, mode=Mode.LINEAR) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if Mode(mode) is Mode.LINEAR:
        v = thetas * (2 / np.pi) * 255
    else:
        v = np.sin(thetas) * 255
    return np.clip(round_half_up(v), 0, 255).astype(np.uint8)


def split_distribution(dist, n: int):
    """(p0, p1): per-pixel probabilities with the gray qubit at 0 and at 1."""
    dist = np.asarray(dist, dtype=float).reshape(-1)
    npix = 1 << (2 * n)
    if dist.size != 2 * npix:
        raise ImageError(f"distribution has {dist.size} entries, expected {2 * npix}")
    if np.any(dist < -1e-12):
        raise ImageError("negative probability")
    dist = np.clip(dist, 0.0, None)
    return dist[:npix], dist[npix:]


def probs_to_image(dist, n: int, mode=Mode.LINEAR, decode=Decode.RATIO) -> Image:
    """Decode a data distribution into gray values, rounded half-up and clamped."""
    if n < 1:
        raise NonEncodable("n must be at least 1")
    p0, p1 = split_distribution(dist, n)
    mode, decode = Mode(mode), Decode(decode)
    if decode is Decode.RATIO:
        tot = p0 + p1
        zero = tot <= 0
        if zero.any():
            warnings.warn(f"{int(zero.sum())} pixel(s) received no probability mass; decoded as 0",
                          ZeroMassWarning, stacklevel=2)
        safe = np.where(zero, 1.0, tot)
        if mode is Mode.LINEAR:
            v = np.arccos(np.sqrt(np.clip(p0 / safe, 0, 1))) * 255 * 2 / np.pi
        else:
            v = np.sqrt(np.clip(p1 / safe, 0, 1)) * 255
        v = np.where(zero, 0.0, v)
    else:
        s = (1 << n) * np.sqrt(p1)
        if mode is Mode.ARCSIN:
            v = s * 255
        else:
            # sin(theta) is recovered; invert the linear angle map through it
            v = np.arcsin(np.clip(s, 0, 1)) * (2 / np.pi) * 255
    px = np.clip(round_half_up(v), 0, 255).astype(np.uint8)
    return Image(1 << n, px)


def relative_difference(a: Image, b: Image) -> float:
    """Mean absolute gray-level deviation as a percentage of 255."""
    if a.side != b.side:
        raise SideMismatch(f"sides {a.side} and {b.side} differ")
    diff = np.abs(a.pixels.astype(float) - b.pixels.astype(float))
    return float(diff.mean() * 100.0 / 255.0)
