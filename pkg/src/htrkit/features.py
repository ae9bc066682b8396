"""Sliding-window feature extraction with PCA and standardization.

A 60-px-high line image is cut into frames by a 30-px window sliding 3
px at a time; each frame is flattened column-major to 1800 values,
tapered by a horizontal cosine (Hann) window, projected to 50
dimensions with PCA, and standardized to zero mean / unit variance per
dimension. PCA and the standardizer are fitted on training frames only
and reused frozen everywhere else.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

WINDOW = 30
SHIFT = 3
FRAME_HEIGHT = 60
PCA_DIM = 50
PCA_SAMPLE_CAP = 100_000
STDDEV_FLOOR = 1e-6

_TRANSFORM_MAGIC = b"CSPC"
_TRANSFORM_VERSION = 1


def frame_count(width: int, window: int = WINDOW, shift: int = SHIFT) -> int:
    """Number of frames produced for an image of the given width."""
    return int(np.ceil(max(width - window, 0) / shift)) + 1


def slide_frames(image: np.ndarray, window: int = WINDOW, shift: int = SHIFT,
                 height: int = FRAME_HEIGHT) -> np.ndarray:
    """Cut a height-normalized image into overlapping window frames.

    Frame t covers columns [t*shift, t*shift + window); the image is
    right-padded with background so the last window is full. Each frame
    is flattened column-major (all rows of column 0, then column 1, ...)
    giving vectors of window * height values. Returns a (T, window *
    height) array, T >= 1.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != height:
        raise ConfigError(
            f"slide_frames expects image height {height}, got {img.shape[0] if img.ndim == 2 else 'non-2D'}"
        )
    if window < 1 or shift < 1:
        raise ConfigError("window and shift must be >= 1")
    t = frame_count(img.shape[1], window, shift)
    padded_w = (t - 1) * shift + window
    padded = np.zeros((height, padded_w), dtype=np.float64)
    padded[:, : img.shape[1]] = img
    frames = np.empty((t, window * height), dtype=np.float64)
    for i in range(t):
        frames[i] = padded[:, i * shift : i * shift + window].T.reshape(-1)
    return frames


def cosine_window(frames: np.ndarray, window: int = WINDOW,
                  height: int = FRAME_HEIGHT) -> np.ndarray:
    """Taper each frame's columns with a Hann window across the width.

    Column c is weighted by 0.5 * (1 - cos(2*pi*(c + 0.5) / window)),
    near zero at the edges and near one in the middle.
    """
    arr = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if arr.shape[-1] != window * height:
        raise ConfigError(
            f"frame dim {arr.shape[-1]} != window*height = {window * height}"
        )
    c = np.arange(window)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * (c + 0.5) / window))
    taper = np.repeat(w, height)  # column-major flattening: column varies slowest
    out = arr * taper
    return out if np.asarray(frames).ndim > 1 else out[0]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (input_dim,)
    basis: np.ndarray  # (output_dim, input_dim), orthonormal rows

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    stddev: np.ndarray  # floored at STDDEV_FLOOR, always > 0


def fit_pca(frames: np.ndarray, out_dim: int = PCA_DIM) -> PcaModel:
    """Top-``out_dim`` principal components of the sample covariance.

    Basis rows come in descending-eigenvalue order with a fixed sign
    convention (largest-magnitude entry positive) so refitting the same
    data reproduces the same model bit for bit. If the sample has rank
    below ``out_dim``, the missing rows are zero and a warning is
    emitted.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError("fit_pca expects a (n_samples, dim) array")
    n, d = x.shape
    if out_dim > d:
        raise ConfigError(f"out_dim {out_dim} exceeds input dim {d}")
    if n < out_dim:
        raise ConfigError(f"need at least {out_dim} sample frames, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(n - 1, 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1][:out_dim]
    vals = eigval[order]
    basis = eigvec[:, order].T.copy()
    tol = max(vals[0], 0.0) * 1e-12 + 1e-18
    rank = int((vals > tol).sum())
    if rank < out_dim:
        warnings.warn(
            f"PCA sample rank {rank} < requested {out_dim}; zero-padding remaining components"
        )
        basis[rank:] = 0.0
    # sign convention: each row's largest-magnitude entry is positive
    for row in basis[:rank]:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(mean=mean, basis=basis)


def apply_pca(frames: np.ndarray, model: PcaModel) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if arr.shape[-1] != model.input_dim:
        raise ConfigError(
            f"frame dim {arr.shape[-1]} != PCA input dim {model.input_dim}"
        )
    out = (arr - model.mean) @ model.basis.T
    return out if np.asarray(frames).ndim > 1 else out[0]


def fit_standardizer(frames: np.ndarray) -> Standardizer:
    """Per-dimension mean/stddev over the training frames."""
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("fit_standardizer needs >= 2 frames")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    low = std < STDDEV_FLOOR
    if low.any():
        warnings.warn(f"{int(low.sum())} zero-variance dimensions floored at {STDDEV_FLOOR}")
        std = np.where(low, STDDEV_FLOOR, std)
    return Standardizer(mean=mean, stddev=std)


def standardize(frames: np.ndarray, s: Standardizer) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if arr.shape[-1] != s.mean.shape[0]:
        raise ConfigError("frame dim does not match standardizer")
    out = (arr - s.mean) / s.stddev
    return out if np.asarray(frames).ndim > 1 else out[0]


@dataclass(frozen=True)
class FeatureTransform:
    """The frozen feature pipeline: cosine window -> PCA -> standardize."""

    pca: PcaModel
    standardizer: Standardizer
    window: int = WINDOW
    shift: int = SHIFT
    height: int = FRAME_HEIGHT

    def __call__(self, image: np.ndarray) -> np.ndarray:
        raw = slide_frames(image, self.window, self.shift, self.height)
        tapered = cosine_window(raw, self.window, self.height)
        return standardize(apply_pca(tapered, self.pca), self.standardizer)


def fit_feature_transform(images: list[np.ndarray], out_dim: int = PCA_DIM,
                          window: int = WINDOW, shift: int = SHIFT,
                          height: int = FRAME_HEIGHT,
                          sample_cap: int = PCA_SAMPLE_CAP,
                          seed: int = 0) -> FeatureTransform:
    """Fit PCA + standardizer on (a uniform subsample of) training frames."""
    if not images:
        raise ConfigError("no training images to fit features on")
    all_frames = [cosine_window(slide_frames(im, window, shift, height), window, height)
                  for im in images]
    stacked = np.concatenate(all_frames, axis=0)
    if stacked.shape[0] > sample_cap:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(stacked.shape[0], size=sample_cap, replace=False))
        stacked = stacked[idx]
    pca = fit_pca(stacked, out_dim)
    projected = apply_pca(stacked, pca)
    return FeatureTransform(pca=pca, standardizer=fit_standardizer(projected),
                            window=window, shift=shift, height=height)


# ---------------------------------------------------------------------------
# Binary container: magic "CSPC", version, dims, then the fitted arrays as
# row-major little-endian float64 (pca mean, pca basis, std mean, std stddev).


def save_feature_transform(path, ft: FeatureTransform) -> None:
    with open(path, "wb") as fh:
        fh.write(_TRANSFORM_MAGIC)
        fh.write(struct.pack("<5I", _TRANSFORM_VERSION, ft.pca.input_dim,
                             ft.pca.output_dim, ft.window, ft.shift))
        fh.write(struct.pack("<I", ft.height))
        for arr in (ft.pca.mean, ft.pca.basis, ft.standardizer.mean,
                    ft.standardizer.stddev):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_feature_transform(path) -> FeatureTransform:
    with open(path, "rb") as fh:
        if fh.read(4) != _TRANSFORM_MAGIC:
            raise DataError("not a feature-transform file (bad magic)")
        version, in_dim, out_dim, window, shift = struct.unpack("<5I", fh.read(20))
        (height,) = struct.unpack("<I", fh.read(4))
        if version != _TRANSFORM_VERSION:
            raise DataError(f"unsupported feature-transform version {version}")

        def read_arr(*shape):
            n = int(np.prod(shape))
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise DataError("truncated feature-transform file")
            return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

        mean = read_arr(in_dim)
        basis = read_arr(out_dim, in_dim)
        smean = read_arr(out_dim)
        sstd = read_arr(out_dim)
    return FeatureTransform(PcaModel(mean, basis), Standardizer(smean, sstd),
                            window=window, shift=shift, height=height)
