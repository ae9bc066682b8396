"""Built-in stroke templates for synthetic handwriting.

Each glyph is a tuple of strokes; each stroke is a tuple of (x, y)
control points in a unit box with x growing right and y growing down
(0 = top). Strokes of four or more points render as chained cubic
Bezier segments, shorter ones as polylines, so curved letters come out
rounded and stick letters stay straight. Shapes are deliberately
simple -- the goal is a distinct, learnable silhouette per character,
not typographic beauty.
"""

GLYPHS = {
    "a": (((0.75, 0.40), (0.12, 0.30), (0.12, 0.95), (0.78, 0.85)),
          ((0.78, 0.28), (0.78, 1.00))),
    "b": (((0.15, 0.00), (0.15, 1.00)),
          ((0.15, 0.45), (0.85, 0.38), (0.85, 1.00), (0.15, 0.95))),
    "c": (((0.85, 0.40), (0.10, 0.28), (0.10, 0.95), (0.85, 0.85)),),
    "d": (((0.85, 0.00), (0.85, 1.00)),
          ((0.85, 0.45), (0.15, 0.38), (0.15, 1.00), (0.85, 0.95))),
    "e": (((0.10, 0.62), (0.90, 0.58)),
          ((0.88, 0.55), (0.55, 0.22), (0.10, 0.50), (0.25, 0.95), (0.85, 0.90))),
    "f": (((0.70, 0.05), (0.35, 0.00), (0.32, 0.50), (0.32, 1.00)),
          ((0.05, 0.42), (0.62, 0.42))),
    "g": (((0.78, 0.35), (0.18, 0.25), (0.18, 0.72), (0.78, 0.66)),
          ((0.78, 0.28), (0.78, 0.88), (0.55, 1.00), (0.22, 0.95))),
    "h": (((0.15, 0.00), (0.15, 1.00)),
          ((0.15, 0.55), (0.55, 0.30), (0.85, 0.52), (0.85, 1.00))),
    "i": (((0.50, 0.08),),
          ((0.50, 0.32), (0.50, 1.00))),
    "j": (((0.62, 0.08),),
          ((0.62, 0.32), (0.62, 0.85), (0.45, 1.00), (0.18, 0.92))),
    "k": (((0.15, 0.00), (0.15, 1.00)),
          ((0.80, 0.30), (0.15, 0.62)),
          ((0.38, 0.52), (0.85, 1.00))),
    "l": (((0.50, 0.00), (0.50, 1.00)),),
    "m": (((0.10, 1.00), (0.10, 0.38)),
          ((0.10, 0.52), (0.30, 0.28), (0.50, 0.50), (0.50, 1.00)),
          ((0.50, 0.52), (0.70, 0.28), (0.90, 0.50), (0.90, 1.00))),
    "n": (((0.15, 1.00), (0.15, 0.35)),
          ((0.15, 0.52), (0.50, 0.28), (0.85, 0.50), (0.85, 1.00))),
    "o": (((0.50, 0.28), (0.10, 0.38), (0.10, 0.92), (0.50, 0.98),
           (0.90, 0.92), (0.90, 0.38), (0.50, 0.28)),),
    "p": (((0.15, 0.30), (0.15, 1.00)),
          ((0.15, 0.35), (0.85, 0.28), (0.85, 0.72), (0.15, 0.68))),
    "q": (((0.85, 0.30), (0.85, 1.00)),
          ((0.85, 0.35), (0.15, 0.28), (0.15, 0.72), (0.85, 0.68))),
    "r": (((0.20, 0.32), (0.20, 1.00)),
          ((0.20, 0.55), (0.48, 0.28), (0.85, 0.38))),
    "s": (((0.85, 0.35), (0.18, 0.26), (0.25, 0.60), (0.75, 0.66),
           (0.82, 0.96), (0.12, 0.90)),),
    "t": (((0.40, 0.02), (0.40, 0.88), (0.70, 1.00)),
          ((0.08, 0.32), (0.75, 0.32))),
    "u": (((0.15, 0.32), (0.15, 0.85), (0.50, 1.00), (0.85, 0.80)),
          ((0.85, 0.32), (0.85, 1.00))),
    "v": (((0.10, 0.30), (0.50, 1.00)),
          ((0.50, 1.00), (0.90, 0.30))),
    "w": (((0.05, 0.30), (0.28, 1.00)),
          ((0.28, 1.00), (0.50, 0.45)),
          ((0.50, 0.45), (0.72, 1.00)),
          ((0.72, 1.00), (0.95, 0.30))),
    "x": (((0.10, 0.28), (0.90, 1.00)),
          ((0.90, 0.28), (0.10, 1.00))),
    "y": (((0.15, 0.28), (0.52, 0.72)),
          ((0.88, 0.28), (0.35, 1.00), (0.10, 0.92))),
    "z": (((0.10, 0.30), (0.85, 0.30)),
          ((0.85, 0.30), (0.15, 0.92)),
          ((0.15, 0.92), (0.90, 0.92))),
    "0": (((0.50, 0.02), (0.12, 0.12), (0.12, 0.88), (0.50, 0.98),
           (0.88, 0.88), (0.88, 0.12), (0.50, 0.02)),),
    "1": (((0.30, 0.22), (0.55, 0.02)),
          ((0.55, 0.02), (0.55, 1.00))),
    "2": (((0.15, 0.22), (0.50, -0.02), (0.85, 0.25), (0.20, 0.95)),
          ((0.20, 0.95), (0.90, 0.95))),
    "3": (((0.15, 0.12), (0.80, 0.02), (0.80, 0.45), (0.38, 0.50)),
          ((0.38, 0.50), (0.85, 0.55), (0.85, 0.95), (0.15, 0.88))),
    "4": (((0.70, 0.02), (0.70, 1.00)),
          ((0.70, 0.02), (0.10, 0.65)),
          ((0.10, 0.65), (0.90, 0.65))),
    "5": (((0.80, 0.05), (0.22, 0.05)),
          ((0.22, 0.05), (0.22, 0.45)),
          ((0.22, 0.45), (0.82, 0.40), (0.82, 0.95), (0.15, 0.88))),
    "6": (((0.75, 0.02), (0.22, 0.45), (0.15, 0.80)),
          ((0.15, 0.80), (0.20, 0.52), (0.85, 0.55), (0.80, 0.98), (0.18, 0.92))),
    "7": (((0.10, 0.05), (0.90, 0.05)),
          ((0.90, 0.05), (0.35, 1.00))),
    "8": (((0.50, 0.02), (0.14, 0.10), (0.14, 0.42), (0.50, 0.50),
           (0.86, 0.58), (0.86, 0.92), (0.50, 0.98)),
          ((0.50, 0.02), (0.86, 0.10), (0.86, 0.42), (0.50, 0.50),
           (0.14, 0.58), (0.14, 0.92), (0.50, 0.98))),
    "9": (((0.85, 0.15), (0.15, 0.02), (0.15, 0.50), (0.85, 0.42)),
          ((0.85, 0.10), (0.80, 0.60), (0.58, 1.00))),
}


def default_glyph_bank() -> dict[str, tuple]:
    """Templates for a-z and 0-9. Space needs no template."""
    return dict(GLYPHS)
