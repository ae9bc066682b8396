"""PGM image I/O for line images.

Internally ink is 1.0 on a 0.0 background; PGM files follow the visual
convention instead (ink black = 0, background white = 255, maxval 255).
Both ASCII (P2) and binary (P5) variants are supported.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def write_pgm(path, image: np.ndarray, binary: bool = True) -> None:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DataError("line image must be 2-D")
    gray = np.rint(255.0 * (1.0 - np.clip(img, 0.0, 1.0))).astype(np.uint8)
    h, w = gray.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(gray.tobytes())
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"P2\n{w} {h}\n255\n")
            for row in gray:
                fh.write(" ".join(str(v) for v in row) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P2", b"P5"):
        raise DataError("not a P2/P5 PGM file")
    magic = data[:2]
    # header: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        tokens.append(data[start:pos])
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise DataError(f"bad PGM header: {exc}") from exc
    if maxval <= 0 or maxval > 255:
        raise DataError(f"unsupported PGM maxval {maxval}")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    else:
        values = data[pos:].split()
        if len(values) < w * h:
            raise DataError("truncated P2 raster")
        raster = np.array([int(v) for v in values[: w * h]], dtype=np.float64)
    gray = raster.reshape(h, w).astype(np.float64)
    return 1.0 - gray / float(maxval)
