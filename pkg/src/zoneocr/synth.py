"""Deterministic synthetic glyph corpus.

Every class has a prototype made of 2-5 strokes (straight lines or circular arcs)
and 0-2 round dots. A sample jitters the prototype (shift, rotation, stroke
thickness, per-stroke wobble), sprinkles single-pixel specks, and adds per-pixel intensity noise.
Randomness comes from numpy PCG64 generators keyed by
``SeedSequence([master_seed, class_id])`` for prototypes and
``SeedSequence([master_seed, class_id, sample_index])`` for samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .raster import GrayImage, RawDataset, load_dataset, write_classes_tsv, write_pgm

INK = 30
PAPER = 235
DOT_RADIUS = 2.6
ARC_SEGMENTS = 12


@dataclass(frozen=True)
class SynthConfig:
    n_classes: int = 44
    samples_per_class: int = 102
    canvas: int = 64
    max_shift: int = 6
    max_rotation: float = 10.0
    thickness_min: float = 2.0
    thickness_max: float = 4.0
    speck_rate: float = 2.0
    pixel_noise: int = 15
    stroke_jitter: float = 2.0
    master_seed: int = 42

    def __post_init__(self):
        if self.n_classes < 2 or self.samples_per_class < 2:
            raise ValueError("need at least 2 classes and 2 samples per class")
        if self.canvas < 16:
            raise ValueError("canvas must be at least 16 pixels")
        if min(self.max_shift, self.max_rotation, self.speck_rate, self.pixel_noise, self.stroke_jitter) < 0:
            raise ValueError("jitter, speck and noise settings must be non-negative")
        if not 0 < self.thickness_min <= self.thickness_max:
            raise ValueError("need 0 < thickness_min <= thickness_max")

    @classmethod
    def from_json(cls, text: str) -> SynthConfig:
        doc = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown SynthConfig keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


@dataclass(frozen=True)
class Prototype:
    # each stroke is an (n, 2) polyline in canvas coordinates (x, y)
    strokes: tuple[tuple[tuple[float, float], ...], ...]
    dots: tuple[tuple[float, float], ...]
    params: tuple[float, ...]


def _line(rng, lo, hi):
    while True:
        p0 = rng.uniform(lo, hi, 2)
        p1 = rng.uniform(lo, hi, 2)
        if np.hypot(*(p1 - p0)) >= 0.35 * (hi - lo):
            return [tuple(p0), tuple(p1)], [0.0, *p0, *p1]


def _arc(rng, lo, hi):
    span = hi - lo
    r = rng.uniform(0.18, 0.42) * span
    cx, cy = rng.uniform(lo + r * 0.5, hi - r * 0.5, 2)
    start = rng.uniform(0, 2 * math.pi)
    sweep = rng.uniform(0.6, 1.5) * math.pi
    ts = start + sweep * np.linspace(0, 1, ARC_SEGMENTS + 1)
    pts = np.clip(np.column_stack([cx + r * np.cos(ts), cy + r * np.sin(ts)]), lo, hi)
    return [tuple(p) for p in pts], [1.0, cx, cy, r, start, sweep]


def make_prototype(class_id: int, cfg: SynthConfig) -> Prototype:
    if not 0 <= class_id < cfg.n_classes:
        raise ValueError(f"class {class_id} out of range 0..{cfg.n_classes - 1}")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, class_id]))
    lo, hi = 0.14 * cfg.canvas, 0.86 * cfg.canvas
    strokes, params = [], []
    for _ in range(int(rng.integers(2, 6))):
        pts, p = (_arc if rng.random() < 0.4 else _line)(rng, lo, hi)
        strokes.append(tuple(pts))
        params.extend(p)
    dots = []
    for _ in range(int(rng.integers(0, 3))):
        d = tuple(rng.uniform(lo, hi, 2))
        dots.append(d)
        params.extend(d)
    return Prototype(tuple(strokes), tuple(dots), tuple(float(v) for v in params))


def _segment_dist2(px, py, segs):
    """Min squared distance from pixel centers to a set of segments, segs shaped (S, 4)."""
    x0, y0, x1, y1 = (segs[:, i][:, None] for i in range(4))
    dx, dy = x1 - x0, y1 - y0
    len2 = dx * dx + dy * dy
    len2[len2 == 0] = 1.0
    t = np.clip(((px - x0) * dx + (py - y0) * dy) / len2, 0.0, 1.0)
    ex, ey = x0 + t * dx - px, y0 + t * dy - py
    return (ex * ex + ey * ey).min(axis=0)


def _render(proto: Prototype, cfg: SynthConfig, shift, angle_deg, thickness, strokes=None) -> np.ndarray:
    n = cfg.canvas
    c = (n - 1) / 2.0
    a = math.radians(angle_deg)
    cos_a, sin_a = math.cos(a), math.sin(a)

    def place(pts):
        p = np.asarray(pts, dtype=np.float64) - c
        x = cos_a * p[:, 0] - sin_a * p[:, 1] + c + shift[0]
        y = sin_a * p[:, 0] + cos_a * p[:, 1] + c + shift[1]
        return np.column_stack([x, y])

    segs = []
    for stroke in (proto.strokes if strokes is None else strokes):
        p = place(stroke)
        segs.append(np.hstack([p[:-1], p[1:]]))
    segs = np.vstack(segs)
    dots = place(proto.dots) if proto.dots else np.empty((0, 2))
    dot_r = max(DOT_RADIUS, thickness / 2.0 + 1.0)

    # only pixels inside the padded bounding box can be inked
    pts = np.vstack([segs[:, :2], segs[:, 2:], dots])
    pad = max(thickness, 2 * dot_r) + 1
    x0, y0 = np.clip(np.floor(pts.min(axis=0) - pad).astype(int), 0, n)
    x1, y1 = np.clip(np.ceil(pts.max(axis=0) + pad).astype(int) + 1, 0, n)
    ink = np.zeros((n, n), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return ink
    yy, xx = np.mgrid[y0:y1, x0:x1]
    px, py = xx.ravel()[None, :].astype(np.float64), yy.ravel()[None, :].astype(np.float64)
    box = _segment_dist2(px, py, segs) <= (thickness / 2.0) ** 2
    if len(dots):
        dist2 = ((px - dots[:, 0:1]) ** 2 + (py - dots[:, 1:2]) ** 2).min(axis=0)
        box |= dist2 <= dot_r * dot_r
    ink[y0:y1, x0:x1] = box.reshape(y1 - y0, x1 - x0)
    return ink


def _wobble(rng, stroke, amount: float) -> np.ndarray:
    """Per-sample stroke distortion: shift, rescale about the centroid, nudge line ends."""
    pts = np.asarray(stroke, dtype=np.float64)
    if amount == 0:
        return pts
    centre = pts.mean(axis=0)
    scale = 1.0 + rng.uniform(-0.05, 0.05) * amount
    pts = (pts - centre) * scale + centre + rng.uniform(-amount, amount, 2)
    if len(pts) == 2:
        pts = pts + rng.uniform(-amount, amount, pts.shape)
    return pts


def render_prototype(class_id: int, cfg: SynthConfig) -> GrayImage:
    """Clean rendering at mid-range thickness with no jitter, specks or noise."""
    proto = make_prototype(class_id, cfg)
    ink = _render(proto, cfg, (0.0, 0.0), 0.0, (cfg.thickness_min + cfg.thickness_max) / 2)
    return GrayImage(np.where(ink, INK, PAPER).astype(np.uint8))


def gen_glyph(class_id: int, sample_index: int, cfg: SynthConfig) -> GrayImage:
    proto = make_prototype(class_id, cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, class_id, sample_index]))
    shift = rng.integers(-cfg.max_shift, cfg.max_shift + 1, 2)
    angle = rng.uniform(-cfg.max_rotation, cfg.max_rotation)
    if cfg.thickness_min == cfg.thickness_max:
        thickness = cfg.thickness_min
    else:
        thickness = rng.uniform(cfg.thickness_min, cfg.thickness_max)
    strokes = [_wobble(rng, stroke, cfg.stroke_jitter) for stroke in proto.strokes]
    ink = _render(proto, cfg, (float(shift[0]), float(shift[1])), angle, thickness, strokes)
    n = cfg.canvas
    for _ in range(int(rng.poisson(cfg.speck_rate)) if cfg.speck_rate > 0 else 0):
        x, y = rng.integers(0, n, 2)
        ink[y, x] = True
    pix = np.where(ink, INK, PAPER).astype(np.int16)
    if cfg.pixel_noise:
        pix += rng.integers(-cfg.pixel_noise, cfg.pixel_noise + 1, pix.shape).astype(np.int16)
    return GrayImage(np.clip(pix, 0, 255).astype(np.uint8))


def sample_filename(class_id: int, sample_index: int) -> str:
    return f"c{class_id:03d}_s{sample_index:04d}.pgm"


def gen_corpus(cfg: SynthConfig, out: str | Path) -> RawDataset:
    """Write classes.tsv and class_<id>/*.pgm under ``out`` and load the result back."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_classes_tsv(out / "classes.tsv", [(c, f"synth_{c}") for c in range(cfg.n_classes)])
    for c in range(cfg.n_classes):
        cdir = out / f"class_{c}"
        cdir.mkdir(exist_ok=True)
        for i in range(cfg.samples_per_class):
            (cdir / sample_filename(c, i)).write_bytes(write_pgm(gen_glyph(c, i, cfg)))
    return load_dataset(out)
