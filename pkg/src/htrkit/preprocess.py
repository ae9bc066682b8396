"""Text-line image cleanup: baseline and slant correction, height normalization.

Both corrections search a grid of candidate angles, apply the
transform, and keep the angle whose projection profile is sharpest.
Baseline search rotates and scores row profiles after run-length
smoothing (RLSA) merges the characters into a solid band; slant search
shears and scores raw column profiles, which peak when strokes stand
upright. Geometric transforms on binary images use nearest-neighbor
resampling; only the final height normalization interpolates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

TARGET_HEIGHT = 60
RLSA_RUN_AT_TARGET = 20  # px at 60 px line height, scaled for other heights

BASELINE_RANGE = 10.0
BASELINE_STEP = 0.5
SLANT_RANGE = 25.0
SLANT_STEP = 1.0


@dataclass
class CorrectionResult:
    """Corrected image plus the angles the searches settled on."""

    image: np.ndarray
    baseline_angle: float = 0.0
    slant_angle: float = 0.0
    candidates: list[tuple[float, float]] = field(default_factory=list)


def binarize(image: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold to {0, 1}; pixels >= threshold become ink."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError("binarize threshold must lie in (0, 1)")
    return (np.asarray(image, dtype=np.float64) >= threshold).astype(np.float64)


def _check_binary(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DataError("line image must be 2-D")
    if not np.isin(img, (0.0, 1.0)).all():
        raise DataError("operation requires a binary image; binarize first")
    return img


def rlsa_horizontal(image: np.ndarray, run_threshold: int) -> np.ndarray:
    """Fill short background runs between ink pixels on each row.

    A run of background strictly shorter than ``run_threshold`` is
    filled only when ink flanks it on both sides within the row, so
    leading and trailing background never changes. Idempotent, and only
    ever adds ink.
    """
    img = _check_binary(image)
    if run_threshold < 0:
        raise ConfigError("run_threshold must be >= 0")
    out = img.copy()
    if run_threshold <= 1:
        return out
    for row in out:
        ink = np.flatnonzero(row)
        if ink.size < 2:
            continue
        gaps = np.diff(ink) - 1
        for j in np.flatnonzero((gaps > 0) & (gaps < run_threshold)):
            row[ink[j] + 1 : ink[j + 1]] = 1.0
    return out


def rlsa_run_threshold(height: int) -> int:
    return max(1, round(RLSA_RUN_AT_TARGET * height / TARGET_HEIGHT))


def rotate(image: np.ndarray, angle: float) -> np.ndarray:
    """Nearest-neighbor rotation about the image center, canvas grown.

    Positive angles turn the content counter-clockwise on screen
    (x right, y down). Limited to |angle| <= 45 degrees.
    """
    if abs(angle) > 45.0:
        raise ConfigError("rotation angle out of range (|angle| <= 45)")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    theta = np.deg2rad(angle)
    c, s = np.cos(theta), np.sin(theta)
    new_w = int(np.ceil(w * abs(c) + h * abs(s)))
    new_h = int(np.ceil(w * abs(s) + h * abs(c)))
    yo, xo = np.mgrid[0:new_h, 0:new_w]
    xr = xo - (new_w - 1) / 2.0
    yr = yo - (new_h - 1) / 2.0
    # inverse map: screen-CCW content rotation = +theta in (x right, y down)
    xi = np.rint(c * xr - s * yr + (w - 1) / 2.0).astype(np.int64)
    yi = np.rint(s * xr + c * yr + (h - 1) / 2.0).astype(np.int64)
    ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.zeros((new_h, new_w), dtype=np.float64)
    out[ok] = img[yi[ok], xi[ok]]
    return out


def shear_horizontal(image: np.ndarray, angle: float) -> np.ndarray:
    """Shift each row right by (rows above the bottom) * tan(angle).

    The bottom row stays put; positive angles lean content to the
    right. Row shifts are rounded to whole pixels (nearest neighbor).
    """
    if abs(angle) > 45.0:
        raise ConfigError("shear angle out of range (|angle| <= 45)")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    t = np.tan(np.deg2rad(angle))
    shifts = np.rint((h - 1 - np.arange(h)) * t).astype(np.int64)
    lo, hi = int(shifts.min()), int(shifts.max())
    out = np.zeros((h, w + hi - lo), dtype=np.float64)
    for r in range(h):
        off = shifts[r] - lo
        out[r, off : off + w] = img[r]
    return out


def score_projection(image: np.ndarray) -> float:
    """Row-profile sharpness: sum of squared row ink counts / total ink squared.

    Expects the (already RLSA-smoothed) binary image. 1.0 when all ink
    sits in a single row, 1/H for ink spread evenly over H rows, 0 for
    a blank image.
    """
    img = _check_binary(image)
    rows = img.sum(axis=1)
    total = rows.sum()
    if total == 0:
        return 0.0
    return float((rows**2).sum() / total**2)


def score_column_projection(image: np.ndarray) -> float:
    """Column analog of score_projection; peaks when strokes are upright."""
    img = _check_binary(image)
    cols = img.sum(axis=0)
    total = cols.sum()
    if total == 0:
        return 0.0
    return float((cols**2).sum() / total**2)


def _angle_grid(angle_range: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ConfigError("angle step must be > 0")
    if angle_range < 0:
        raise ConfigError("angle range must be >= 0")
    n = int(np.floor(angle_range / step + 1e-9))
    return np.arange(-n, n + 1) * step


def _best_angle(scored: list[tuple[float, float]]) -> float:
    # ties: closest to zero first, then the smaller angle
    best = max(scored, key=lambda p: (p[1], -abs(p[0]), -p[0]))
    return best[0]


def correct_baseline(image: np.ndarray, angle_range: float = BASELINE_RANGE,
                     step: float = BASELINE_STEP) -> CorrectionResult:
    """Search rotations for the sharpest RLSA'd row profile and apply it."""
    img = binarize(np.asarray(image, dtype=np.float64), 0.5)
    if img.sum() == 0:
        return CorrectionResult(image=img, baseline_angle=0.0)
    scored = []
    for angle in _angle_grid(angle_range, step):
        rot = rotate(img, angle)
        smooth = rlsa_horizontal(rot, rlsa_run_threshold(rot.shape[0]))
        scored.append((float(angle), score_projection(smooth)))
    best = _best_angle(scored)
    return CorrectionResult(image=rotate(img, best), baseline_angle=best,
                            candidates=scored)


def correct_slant(image: np.ndarray, angle_range: float = SLANT_RANGE,
                  step: float = SLANT_STEP) -> CorrectionResult:
    """Search shears for the sharpest column profile and apply it."""
    img = binarize(np.asarray(image, dtype=np.float64), 0.5)
    if img.sum() == 0:
        return CorrectionResult(image=img, slant_angle=0.0)
    scored = []
    for angle in _angle_grid(angle_range, step):
        sheared = shear_horizontal(img, angle)
        scored.append((float(angle), score_column_projection(sheared)))
    best = _best_angle(scored)
    return CorrectionResult(image=shear_horizontal(img, best), slant_angle=best,
                            candidates=scored)


def normalize_height(image: np.ndarray, target: int = TARGET_HEIGHT) -> np.ndarray:
    """Bilinear rescale to the target height, preserving aspect ratio."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if h < 1:
        raise DataError("image height must be >= 1")
    if h == target:
        return img.copy()
    new_w = max(1, round(w * target / h))
    sy = h / target
    sx = w / new_w
    ys = np.clip((np.arange(target) + 0.5) * sy - 0.5, 0, h - 1)
    xs = np.clip((np.arange(new_w) + 0.5) * sx - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def preprocess_line(image: np.ndarray, baseline_range: float = BASELINE_RANGE,
                    baseline_step: float = BASELINE_STEP,
                    slant_range: float = SLANT_RANGE, slant_step: float = SLANT_STEP,
                    target_height: int = TARGET_HEIGHT) -> CorrectionResult:
    """Full cleanup: baseline correction, slant correction, height normalization."""
    base = correct_baseline(image, baseline_range, baseline_step)
    slant = correct_slant(base.image, slant_range, slant_step)
    final = normalize_height(slant.image, target_height)
    return CorrectionResult(image=final, baseline_angle=base.baseline_angle,
                            slant_angle=slant.slant_angle,
                            candidates=base.candidates + slant.candidates)
