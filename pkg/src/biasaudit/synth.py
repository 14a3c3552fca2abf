"""Synthetic two-group facial-expression data for desk-scale bias experiments.

Each emotion is a parametric cartoon face (brow tilt, eye opening, mouth
curve and opening). The two groups are drawn with systematically different
styles: face shape, stroke weight, skin/background tone and feature
placement. Subjects add their own jitter on top of the group style, images
add pose, expression-strength and noise jitter.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import EmotionLabel, GroupTag, ManifestEntry, write_manifest
from .errors import InvalidSpec
from .imgproc import rotate, write_pgm


@dataclass(frozen=True)
class GroupStyle:
    face_half_width: float
    face_half_height: float
    stroke: float           # line width in pixels at 48 px
    face_tone: float
    background_tone: float
    eye_y: float
    eye_spacing: float
    brow_gap: float
    mouth_y: float
    mouth_scale: float
    # added to the emotion's mouth curvature for FEAR only; positive reads as a smile
    fear_smile: float = 0.0


# (brow tilt, brow raise, eye opening, mouth curve, mouth opening, mouth width)
# tilt > 0 pulls the inner brow ends down.
EMOTION_GLYPHS = {
    EmotionLabel.ANGRY:    (0.55, -0.02, 0.55, -0.15, 0.00, 0.75),
    EmotionLabel.DISGUST:  (0.30, -0.01, 0.45, -0.35, 0.18, 0.60),
    EmotionLabel.FEAR:     (-0.40, 0.05, 1.35, -0.05, 0.35, 1.00),
    EmotionLabel.HAPPY:    (0.00, 0.00, 0.85, 0.65, 0.20, 1.05),
    EmotionLabel.SAD:      (-0.55, 0.02, 0.70, -0.55, 0.00, 0.70),
    EmotionLabel.SURPRISE: (0.00, 0.09, 1.50, 0.00, 0.75, 0.50),
}


def default_styles() -> dict[GroupTag, GroupStyle]:
    return {
        GroupTag.MALE: GroupStyle(face_half_width=0.40, face_half_height=0.43, stroke=2.2,
                                  face_tone=150.0, background_tone=60.0, eye_y=0.42,
                                  eye_spacing=0.17, brow_gap=0.09, mouth_y=0.72,
                                  mouth_scale=1.0),
        GroupTag.FEMALE: GroupStyle(face_half_width=0.32, face_half_height=0.47, stroke=1.2,
                                    face_tone=195.0, background_tone=35.0, eye_y=0.37,
                                    eye_spacing=0.13, brow_gap=0.07, mouth_y=0.78,
                                    mouth_scale=0.8, fear_smile=0.35),
    }


@dataclass(frozen=True)
class SynthSpec:
    subjects_per_group: int = 12
    images_per_emotion: int = 4
    size: int = 48
    groups: tuple[GroupTag, ...] = (GroupTag.MALE, GroupTag.FEMALE)
    styles: dict = field(default_factory=default_styles)
    noise_std: float = 5.0
    max_roll_deg: float = 6.0
    subject_jitter: float = 0.02
    tone_jitter: float = 15.0

    def validate(self) -> None:
        if self.subjects_per_group <= 0 or self.images_per_emotion <= 0:
            raise InvalidSpec("subject and image counts must be positive")
        if self.size < 16:
            raise InvalidSpec(f"image size {self.size} too small (minimum 16)")
        if not self.groups or len(set(self.groups)) != len(self.groups):
            raise InvalidSpec("groups must be non-empty and distinct")
        missing = [g for g in self.groups if g not in self.styles]
        if missing:
            raise InvalidSpec(f"no style for groups {missing}")
        if self.noise_std < 0 or self.max_roll_deg < 0:
            raise InvalidSpec("noise and roll must be non-negative")

    @property
    def total_images(self) -> int:
        return len(self.groups) * self.subjects_per_group * len(EMOTION_GLYPHS) * self.images_per_emotion


# -- rasterisation ---------------------------------------------------------

def _segment_distance(xs, ys, pts):
    best = np.full(xs.shape, np.inf)
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        dx, dy = x1 - x0, y1 - y0
        denom = dx * dx + dy * dy
        if denom == 0:
            t = np.zeros_like(xs)
        else:
            t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / denom, 0.0, 1.0)
        d = np.hypot(xs - (x0 + t * dx), ys - (y0 + t * dy))
        np.minimum(best, d, out=best)
    return best


def _paint(canvas, coverage, value):
    canvas *= 1.0 - coverage
    canvas += coverage * value


def _stroke(canvas, xs, ys, pts, width, value):
    d = _segment_distance(xs, ys, pts)
    _paint(canvas, np.clip(width / 2.0 + 0.5 - d, 0.0, 1.0), value)


def _ellipse_coverage(xs, ys, cx, cy, a, b):
    r = np.hypot((xs - cx) / a, (ys - cy) / b)
    return np.clip((1.0 - r) * min(a, b) + 0.5, 0.0, 1.0)


def render_face(size: int, style: GroupStyle, emotion: EmotionLabel, strength: float = 1.0,
                subject: dict | None = None, shift=(0.0, 0.0)):
    """Draw one upright face; returns (float image, left eye, right eye)."""
    subject = subject or {}
    s = float(size)
    px = s / 48.0
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    tilt, raise_, eye_open, curve, mouth_open, mouth_w = EMOTION_GLYPHS[emotion]
    if emotion is EmotionLabel.FEAR:
        curve += style.fear_smile
    curve = curve * strength + subject.get("curve", 0.0)
    tilt = tilt * strength + subject.get("tilt", 0.0)
    raise_ *= strength
    eye_open = 1.0 + (eye_open - 1.0) * strength
    mouth_open *= strength

    cx = 0.5 * s + shift[0]
    cy = 0.52 * s + shift[1]
    face_tone = style.face_tone + subject.get("tone", 0.0)
    ink = max(face_tone - 125.0, 0.0)
    canvas = np.full((size, size), style.background_tone, dtype=np.float64)
    _paint(canvas, _ellipse_coverage(xs, ys, cx, cy, style.face_half_width * s * subject.get("width", 1.0),
                                     style.face_half_height * s), face_tone)

    width = style.stroke * px
    eye_y = (style.eye_y + subject.get("eye_y", 0.0)) * s + shift[1]
    spacing = (style.eye_spacing + subject.get("spacing", 0.0)) * s
    eye_w = 0.065 * s
    eye_h = max(0.035 * s * eye_open, 0.6)
    eyes = []
    for side in (-1, 1):
        ex = cx + side * spacing
        eyes.append((ex, eye_y))
        _paint(canvas, _ellipse_coverage(xs, ys, ex, eye_y, eye_w, eye_h), 250.0)
        _paint(canvas, _ellipse_coverage(xs, ys, ex, eye_y, 0.025 * s, min(0.025 * s, eye_h)), ink * 0.2)
        # brow: inner end at side*inner_x, tilted by `tilt`
        by = eye_y - (style.brow_gap + raise_) * s
        inner = (ex - side * 0.07 * s, by + tilt * 0.06 * s)
        outer = (ex + side * 0.08 * s, by - tilt * 0.03 * s)
        _stroke(canvas, xs, ys, [inner, outer], width * 1.2, ink)

    # nose
    _stroke(canvas, xs, ys, [(cx, eye_y + 0.06 * s), (cx - 0.02 * s, eye_y + 0.17 * s),
                             (cx + 0.02 * s, eye_y + 0.19 * s)], width * 0.8, ink + 20.0)
    if emotion is EmotionLabel.DISGUST:
        for side in (-1, 1):
            _stroke(canvas, xs, ys, [(cx + side * 0.035 * s, eye_y + 0.08 * s),
                                     (cx + side * 0.06 * s, eye_y + 0.12 * s)], width * 0.7, ink + 10.0)

    my = (style.mouth_y + subject.get("mouth_y", 0.0)) * s + shift[1]
    half = 0.13 * s * mouth_w * style.mouth_scale
    t = np.linspace(-1.0, 1.0, 15)
    upper = [(cx + half * u, my - curve * 0.06 * s * (u * u - 0.3)) for u in t]
    if mouth_open > 0.02:
        gap = mouth_open * 0.09 * s
        lower = [(x, y + gap * (1.0 - u * u)) for (x, y), u in zip(upper, t)]
        # fill the opening column by column
        ux = np.array([p[0] for p in upper])
        uy = np.array([p[1] for p in upper])
        ly = np.array([p[1] for p in lower])
        top = np.interp(xs, ux, uy, left=np.inf, right=np.inf)
        bot = np.interp(xs, ux, ly, left=-np.inf, right=-np.inf)
        cov = np.clip(np.minimum(ys - top, bot - ys) + 0.5, 0.0, 1.0)
        _paint(canvas, cov, 20.0)
        _stroke(canvas, xs, ys, lower, width, ink)
    _stroke(canvas, xs, ys, upper, width, ink)
    return canvas, eyes[0], eyes[1]


def _subject_params(rng, jitter, tone_jitter):
    return {
        "curve": rng.uniform(-0.1, 0.1),
        "tilt": rng.uniform(-0.1, 0.1),
        "tone": rng.uniform(-tone_jitter, tone_jitter),
        "width": 1.0 + rng.uniform(-0.06, 0.06),
        "eye_y": rng.uniform(-jitter, jitter),
        "spacing": rng.uniform(-jitter / 2, jitter / 2),
        "mouth_y": rng.uniform(-jitter, jitter),
    }


def render_dataset(spec: SynthSpec, seed: int):
    """Yield ``(image, label, group, subject_id, (left_eye, right_eye), name)``.

    Each subject gets its own RNG stream derived from ``seed``, so adding
    images to one subject never perturbs another.
    """
    spec.validate()
    root = np.random.SeedSequence(seed)
    streams = root.spawn(len(spec.groups) * spec.subjects_per_group)
    size = spec.size
    center = (size / 2.0, size / 2.0)
    k = 0
    for group in spec.groups:
        style = spec.styles[group]
        for subj in range(spec.subjects_per_group):
            rng = np.random.default_rng(streams[k])
            k += 1
            subject_id = f"{group.value[0]}{subj:03d}"
            params = _subject_params(rng, spec.subject_jitter, spec.tone_jitter)
            for emotion in EMOTION_GLYPHS:
                for i in range(spec.images_per_emotion):
                    strength = rng.uniform(0.75, 1.0)
                    shift = tuple(rng.uniform(-1.0, 1.0, size=2) * size / 48.0)
                    roll = math.radians(rng.uniform(-spec.max_roll_deg, spec.max_roll_deg))
                    face, le, re = render_face(size, style, emotion, strength, params, shift)
                    face += rng.normal(0.0, spec.noise_std, size=face.shape)
                    face = np.clip(np.floor(face + 0.5), 0, 255).astype(np.uint8)
                    img = rotate(face, roll, center, fill=style.background_tone)
                    eyes = tuple(_rotate_point(p, roll, center) for p in (le, re))
                    name = f"{subject_id}_{emotion.display.lower()}_{i}.pgm"
                    yield img, emotion, group, subject_id, eyes, name


def _rotate_point(p, angle, center):
    c, s = math.cos(angle), math.sin(angle)
    x, y = p[0] - center[0], p[1] - center[1]
    return (round(center[0] + c * x - s * y, 3), round(center[1] + s * x + c * y, 3))


def synth_dataset(spec: SynthSpec, seed: int, out_dir) -> list[ManifestEntry]:
    """Write every image as PGM under ``out_dir/images`` plus ``out_dir/manifest.csv``."""
    spec.validate()
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    entries = []
    for img, label, group, subject_id, eyes, name in render_dataset(spec, seed):
        write_pgm(os.path.join(img_dir, name), img)
        entries.append(ManifestEntry(os.path.join("images", name), label, group, subject_id, eyes))
    write_manifest(entries, os.path.join(out_dir, "manifest.csv"),
                   header=f"synthetic dataset, seed={seed}, size={spec.size}")
    return entries


def with_overrides(spec: SynthSpec, **kwargs) -> SynthSpec:
    return replace(spec, **kwargs)
