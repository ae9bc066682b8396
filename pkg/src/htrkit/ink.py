"""Online-ink rendering: pen trajectories -> offline text-line images.

Line images are float64 numpy arrays of shape (height, width) with
values in [0, 1]: 0 is background, 1 is ink, row 0 is the top of the
line. Every function here is pure: callers get fresh arrays back.

Strokes are rasterized as chains of cubic Bezier segments. Control
points are grouped with shared endpoints -- segment i uses points
[3i, 3i+3] -- so consecutive segments join without gaps; a trailing
group of 2-3 points degrades to a polyline and a single point to a
disc. Each curve is sampled densely (consecutive samples < 0.5 px
apart) and a disc of the stroke thickness is stamped at every sample,
producing binary ink with no anti-aliasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

INK_FORMAT_VERSION = 1

DEFAULT_THICKNESS = 3
CANVAS_MARGIN_FACTOR = 2  # margin = factor * thickness on all sides
_MAX_SAMPLE_STEP = 0.4  # px between consecutive curve samples


@dataclass(frozen=True)
class InkStroke:
    """One pen-down trajectory: ordered (x, y) points in pixels."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise DataError("stroke needs an (N, 2) point array with N >= 1")
        if not np.all(np.isfinite(pts)):
            raise DataError("stroke coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class InkLine:
    """All strokes of one text line plus its transcript."""

    strokes: tuple[InkStroke, ...]
    transcript: str

    def __post_init__(self):
        object.__setattr__(self, "strokes", tuple(self.strokes))


@dataclass
class RenderReport:
    """Bookkeeping for rasterization; clipping is recorded, not raised."""

    clipped_pixels: int = 0


def eval_cubic_bezier(p0, p1, p2, p3, t):
    """Evaluate the cubic Bezier with control points p0..p3 at t in [0, 1].

    ``t`` may be a scalar or a 1-D array; points are (x, y) pairs.
    Returns an array of shape (2,) or (len(t), 2).
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ConfigError("bezier parameter t must lie in [0, 1]")
    p0, p1, p2, p3 = (np.asarray(p, dtype=np.float64) for p in (p0, p1, p2, p3))
    u = 1.0 - t
    tt = t[..., None] if t.ndim else t
    uu = u[..., None] if u.ndim else u
    return (uu**3) * p0 + 3.0 * (uu**2) * tt * p1 + 3.0 * uu * (tt**2) * p2 + (tt**3) * p3


def _disc_offsets(thickness: int) -> np.ndarray:
    """Integer (dy, dx) offsets covering a disc of the given diameter."""
    r = thickness / 2.0
    n = int(np.floor(r))
    di, dj = np.mgrid[-n : n + 1, -n : n + 1]
    keep = di**2 + dj**2 <= r**2
    return np.stack([di[keep], dj[keep]], axis=1)


def _stamp(canvas: np.ndarray, xs: np.ndarray, ys: np.ndarray, thickness: int,
           report: RenderReport | None) -> None:
    h, w = canvas.shape
    cx = np.rint(xs).astype(np.int64)
    cy = np.rint(ys).astype(np.int64)
    for dy, dx in _disc_offsets(thickness):
        px = cx + dx
        py = cy + dy
        ok = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        if report is not None and not ok.all():
            report.clipped_pixels += int((~ok).sum())
        canvas[py[ok], px[ok]] = 1.0


def _polyline_samples(points: np.ndarray) -> np.ndarray:
    """Sample points along straight segments at < 0.5 px spacing."""
    out = [points[:1]]
    for a, b in zip(points[:-1], points[1:]):
        length = float(np.hypot(*(b - a)))
        n = max(2, int(np.ceil(length / _MAX_SAMPLE_STEP)) + 1)
        t = np.linspace(0.0, 1.0, n)[1:, None]
        out.append(a + t * (b - a))
    return np.concatenate(out, axis=0)


def _bezier_samples(ctrl: np.ndarray) -> np.ndarray:
    # control-polygon length bounds arc length from above
    poly = float(np.sum(np.hypot(*np.diff(ctrl, axis=0).T)))
    n = max(2, int(np.ceil(poly / _MAX_SAMPLE_STEP)) + 1)
    t = np.linspace(0.0, 1.0, n)
    return eval_cubic_bezier(ctrl[0], ctrl[1], ctrl[2], ctrl[3], t)


def stroke_samples(stroke: InkStroke) -> np.ndarray:
    """Dense sample points along the stroke's Bezier/polyline path."""
    pts = stroke.points
    n = len(pts)
    if n == 1:
        return pts.copy()
    chunks = []
    i = 0
    while i + 3 < n:
        chunks.append(_bezier_samples(pts[i : i + 4]))
        i += 3
    if i < n - 1:
        chunks.append(_polyline_samples(pts[i:]))
    return np.concatenate(chunks, axis=0)


def render_stroke(stroke: InkStroke, thickness: int, canvas: np.ndarray,
                  report: RenderReport | None = None) -> np.ndarray:
    """Deposit one stroke onto a copy of ``canvas`` and return it.

    Ink only accumulates: no pixel value decreases. Samples falling
    outside the canvas are clipped and counted in ``report``.
    """
    if thickness < 1:
        raise ConfigError("stroke thickness must be >= 1")
    out = np.array(canvas, dtype=np.float64, copy=True)
    samples = stroke_samples(stroke)
    _stamp(out, samples[:, 0], samples[:, 1], thickness, report)
    return out


def render_line(line: InkLine, thickness: int = DEFAULT_THICKNESS,
                report: RenderReport | None = None) -> np.ndarray:
    """Render all strokes of a line onto one canvas sized to the ink.

    The canvas covers the ink bounding box plus a margin of
    ``2 * thickness`` on every side, so round caps never clip.
    """
    if not line.strokes:
        raise DataError("cannot render a line with no strokes")
    if thickness < 1:
        raise ConfigError("stroke thickness must be >= 1")
    allpts = np.concatenate([s.points for s in line.strokes], axis=0)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    margin = CANVAS_MARGIN_FACTOR * thickness
    width = int(np.ceil(hi[0] - lo[0])) + 2 * margin + 1
    height = int(np.ceil(hi[1] - lo[1])) + 2 * margin + 1
    canvas = np.zeros((height, width), dtype=np.float64)
    shift = np.array([margin, margin]) - lo
    for stroke in line.strokes:
        samples = stroke_samples(stroke) + shift
        _stamp(canvas, samples[:, 0], samples[:, 1], thickness, report)
    return canvas


# ---------------------------------------------------------------------------
# Synthetic corpus generation


@dataclass(frozen=True)
class JitterConfig:
    """Per-glyph random perturbation ranges (uniform, symmetric)."""

    rotate_deg: float = 0.0
    scale: float = 0.0
    shift_px: float = 0.0
    shear_deg: float = 0.0

    @classmethod
    def none(cls) -> "JitterConfig":
        return cls()


def _jitter_transform(rng: np.random.Generator, jitter: JitterConfig):
    theta = np.deg2rad(rng.uniform(-jitter.rotate_deg, jitter.rotate_deg))
    scale = 1.0 + rng.uniform(-jitter.scale, jitter.scale)
    shear = np.tan(np.deg2rad(rng.uniform(-jitter.shear_deg, jitter.shear_deg)))
    dx = rng.uniform(-jitter.shift_px, jitter.shift_px)
    dy = rng.uniform(-jitter.shift_px, jitter.shift_px)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    shr = np.array([[1.0, shear], [0.0, 1.0]])
    return scale * rot @ shr, np.array([dx, dy])


def synth_line(text: str, glyph_bank: dict[str, tuple], rng: np.random.Generator,
               jitter: JitterConfig, glyph_height: float = 36.0,
               advance: float = 0.85) -> InkLine:
    """Lay out ``text`` left to right from glyph stroke templates.

    Glyph templates live in a unit box (x right, y down); they are
    scaled to ``glyph_height`` pixels and placed at a fixed advance of
    ``advance * glyph_height`` per character. A space contributes an
    advance but no ink. Jitter applies an affine perturbation about
    each glyph's center.
    """
    strokes: list[InkStroke] = []
    step = advance * glyph_height
    for k, ch in enumerate(text):
        if ch == " ":
            continue
        if ch not in glyph_bank:
            raise DataError(f"no glyph template for character {ch!r}")
        mat, off = _jitter_transform(rng, jitter)
        origin = np.array([k * step, 0.0])
        center = np.array([0.5, 0.5]) * glyph_height
        for template in glyph_bank[ch]:
            pts = np.asarray(template, dtype=np.float64) * glyph_height
            pts = (pts - center) @ mat.T + center + origin + off
            strokes.append(InkStroke(pts))
    if not strokes:
        raise DataError(f"text {text!r} produced no ink (all spaces?)")
    return InkLine(tuple(strokes), text)


def synth_corpus(texts: list[str], glyph_bank: dict[str, tuple], seed: int,
                 jitter: JitterConfig | None = None, glyph_height: float = 36.0,
                 advance: float = 0.85) -> list[InkLine]:
    """Deterministically synthesize one InkLine per text.

    Each line draws from its own RNG stream derived from (seed, index),
    so the corpus is reproducible and lines could be generated in
    parallel without changing the output.
    """
    jitter = jitter or JitterConfig.none()
    lines = []
    for i, text in enumerate(texts):
        rng = np.random.default_rng([seed, i])
        lines.append(synth_line(text, glyph_bank, rng, jitter, glyph_height, advance))
    return lines


# ---------------------------------------------------------------------------
# Ink file format: one JSON record per line of a text file.
# Fields: "version", "transcript", "strokes" (list of [x, y] pair lists).


def write_ink_file(path, lines: list[InkLine]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            record = {
                "version": INK_FORMAT_VERSION,
                "transcript": line.transcript,
                "strokes": [s.points.tolist() for s in line.strokes],
            }
            fh.write(json.dumps(record) + "\n")


def read_ink_file(path) -> list[InkLine]:
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
                strokes = tuple(InkStroke(np.asarray(p)) for p in record["strokes"])
                lines.append(InkLine(strokes, record["transcript"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"bad ink record on line {lineno}: {exc}") from exc
    return lines
