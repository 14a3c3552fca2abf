"""Netpbm I/O, preprocessing and augmentation of 8-bit grayscale faces.

Images are plain numpy arrays: grayscale is ``uint8`` with shape (h, w),
color is ``uint8`` with shape (h, w, 3). Rounding is half-up everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (BadHeader, BadMagic, DegenerateLandmarks, NonPositiveGamma,
                     ShiftTooLarge, TruncatedPayload, UnsupportedMaxval, ZeroDimension)


def _round_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def check_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim != 2 or img.dtype != np.uint8 or img.size == 0:
        raise ValueError(f"expected non-empty uint8 (h, w) array, got {img.dtype} {img.shape}")
    return img


# -- netpbm ----------------------------------------------------------------

def _parse_header(data: bytes, magic: bytes):
    if data[:2] != magic:
        raise BadMagic(f"expected {magic!r}, got {data[:2]!r}")
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < 3:
        if pos >= n:
            raise BadHeader("header ended early")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tok = data[start:pos]
            if not tok.isdigit():
                raise BadHeader(f"non-numeric header field {tok!r}")
            tokens.append(int(tok))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise BadHeader("missing whitespace after maxval")
    width, height, maxval = tokens
    if width <= 0 or height <= 0:
        raise BadHeader(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    return width, height, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    width, height, offset = _parse_header(data, b"P5")
    payload = data[offset:offset + width * height]
    if len(payload) < width * height:
        raise TruncatedPayload(f"expected {width * height} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(img: np.ndarray) -> bytes:
    check_gray(img)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    width, height, offset = _parse_header(data, b"P6")
    size = 3 * width * height
    payload = data[offset:offset + size]
    if len(payload) < size:
        raise TruncatedPayload(f"expected {size} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(img: np.ndarray) -> bytes:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 (h, w, 3) array, got {img.dtype} {img.shape}")
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_image(path) -> np.ndarray:
    """Load a P5 (gray) or P6 (color) file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P6":
        return decode_ppm(data)
    return decode_pgm(data)


def write_pgm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def write_ppm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


# -- pointwise -------------------------------------------------------------

def to_gray(img: np.ndarray) -> np.ndarray:
    rgb = img.astype(np.float64)
    return _round_u8(0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2])


def gamma_table(gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be positive, got {gamma}")
    levels = np.arange(256, dtype=np.float64)
    return _round_u8(255.0 * (levels / 255.0) ** gamma)


def gamma_correct(img: np.ndarray, gamma: float) -> np.ndarray:
    """``out = round(255 * (in / 255) ** gamma)`` via a 256-entry lookup."""
    return gamma_table(gamma)[img]


# -- geometry --------------------------------------------------------------

def hflip(img: np.ndarray) -> np.ndarray:
    return img[:, ::-1].copy()


def translate_crop(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Window of size (w - |dx|) x (h - |dy|) starting at (max(dx, 0), max(dy, 0))."""
    h, w = img.shape[:2]
    if abs(dx) >= w or abs(dy) >= h:
        raise ShiftTooLarge(f"shift ({dx}, {dy}) too large for {w}x{h} image")
    x0, y0 = max(dx, 0), max(dy, 0)
    return img[y0:y0 + h - abs(dy), x0:x0 + w - abs(dx)].copy()


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float = 0.0) -> np.ndarray:
    """Sample ``img`` at float coordinates; points outside the frame read ``fill``."""
    h, w = img.shape
    src = img.astype(np.float64)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    def at(yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        out = np.full(xx.shape, fill, dtype=np.float64)
        out[inside] = src[yy[inside], xx[inside]]
        return out

    top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx
    bottom = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bottom * fy


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Corner-aligned bilinear resize: output corners sample input corners exactly."""
    if out_w <= 0 or out_h <= 0:
        raise ZeroDimension(f"cannot resize to {out_w}x{out_h}")
    h, w = img.shape
    if (out_w, out_h) == (w, h):
        return img.copy()

    def coords(n_out, n_in):
        if n_out == 1:
            return np.array([(n_in - 1) / 2.0])
        return np.arange(n_out, dtype=np.float64) * ((n_in - 1) / (n_out - 1))

    ys, xs = np.meshgrid(coords(out_h, h), coords(out_w, w), indexing="ij")
    return _round_u8(_interp_clamped(img, xs, ys))


def _interp_clamped(img, xs, ys):
    h, w = img.shape
    src = img.astype(np.float64)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def rotate(img: np.ndarray, angle: float, center: tuple[float, float], fill: float = 0.0) -> np.ndarray:
    """Rotate content by ``angle`` radians about ``center`` (x, y).

    A point q of the input lands at ``center + R(angle) (q - center)`` in the
    output, with R the usual rotation matrix in (x, y) pixel coordinates.
    """
    h, w = img.shape
    cx, cy = center
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    c, s = math.cos(angle), math.sin(angle)
    # inverse map: source = center + R(-angle) (p - center)
    px, py = xs - cx, ys - cy
    sx = cx + c * px + s * py
    sy = cy - s * px + c * py
    return _round_u8(_bilinear_sample(img, sx, sy, fill=fill))


def eye_line_angle(left_eye, right_eye) -> float:
    (lx, ly), (rx, ry) = left_eye, right_eye
    if (lx, ly) == (rx, ry) or not lx < rx:
        raise DegenerateLandmarks(f"bad eye landmarks {left_eye}, {right_eye}")
    return math.atan2(ry - ly, rx - lx)


def align_by_eyes(img: np.ndarray, left_eye, right_eye) -> np.ndarray:
    """Rotate about the eye midpoint so the eye line becomes horizontal."""
    angle = eye_line_angle(left_eye, right_eye)
    if angle == 0.0:
        return img.copy()
    mid = ((left_eye[0] + right_eye[0]) / 2.0, (left_eye[1] + right_eye[1]) / 2.0)
    return rotate(img, -angle, mid)


# -- augmentation ----------------------------------------------------------

@dataclass(frozen=True)
class AugmentConfig:
    gamma_values: tuple[float, ...] = (0.6, 1.4, 1.8)
    translate_px: int = 4
    include_translation: bool = True
    include_flip: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        if not self.gamma_values:
            raise ValueError("gamma_values must be non-empty")
        if any(not g > 0 for g in self.gamma_values):
            raise NonPositiveGamma(f"gamma values must be positive: {self.gamma_values}")
        if self.translate_px < 0:
            raise ValueError("translate_px must be non-negative")

    @property
    def variant_count(self) -> int:
        return ((1 + len(self.gamma_values)) * (1 + int(self.include_translation))
                * (1 + int(self.include_flip)))


def augment(img: np.ndarray, cfg: AugmentConfig, out_size: int) -> list[np.ndarray]:
    """All variants of ``img`` at ``out_size`` x ``out_size``.

    Order is {original, gamma_1, ...} x {as-is, shifted} x {as-is, flipped},
    flip varying fastest, so variants come in (v, hflip(v)) pairs and the
    first one is the plain resized original.
    """
    check_gray(img)
    h, w = img.shape
    t = cfg.translate_px
    if cfg.include_translation and (t >= w or t >= h):
        raise ShiftTooLarge(f"translate_px={t} too large for {w}x{h} image")
    tones = [img] + [gamma_correct(img, g) for g in cfg.gamma_values]
    out = []
    for tone in tones:
        shifted = [tone]
        if cfg.include_translation:
            shifted.append(translate_crop(tone, t, t))
        for s in shifted:
            v = resize_bilinear(s, out_size, out_size)
            out.append(v)
            if cfg.include_flip:
                out.append(hflip(v))
    return out


def preprocess(img: np.ndarray, eye_landmarks: Optional[tuple] = None, out_size: Optional[int] = None) -> np.ndarray:
    """Align (if landmarks), convert to gray (if color), resize (if size given)."""
    if img.ndim == 3:
        if eye_landmarks is not None:
            channels = [align_by_eyes(img[..., c], *eye_landmarks) for c in range(3)]
            img = np.stack(channels, axis=-1)
        img = to_gray(img)
    elif eye_landmarks is not None:
        img = align_by_eyes(img, *eye_landmarks)
    if out_size is not None:
        img = resize_bilinear(img, out_size, out_size)
    return img


def preprocess_test(img: np.ndarray, entry, out_size: int) -> np.ndarray:
    """Test-time path: alignment, grayscale and resize, never augmentation."""
    return preprocess(img, entry.eye_landmarks, out_size)


def load_entry(entry, out_size: int) -> np.ndarray:
    return preprocess_test(read_image(entry.path), entry, out_size)


def load_training_variants(entry, cfg: AugmentConfig, out_size: int) -> list[np.ndarray]:
    base = preprocess(read_image(entry.path), entry.eye_landmarks, None)
    return augment(base, cfg, out_size)
