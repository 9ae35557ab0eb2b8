"""Grayscale image ingestion and the on-grid transformations used by the
digit and horse experiments.

Images are read from PGM (P2 ASCII or P5 binary, 8 or 16 bit) or from a CSV
matrix of intensities, resampled bilinearly to ``n x n`` and turned into a
measure on a 2D grid by normalizing the pixel intensities.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core import DiscreteMeasure, FeatureCost, UniformGrid2D
from ..errors import ConfigInvalid, FileNotFound, UnsupportedFormat, ZeroMassImage


@dataclass(frozen=True, eq=False)
class GrayscaleImage:
    """Intensities in [0, 1], stored as ``pixels[row, col]``."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise UnsupportedFormat(f"image must be a non-empty 2-d array, got shape {px.shape}")
        if px.shape != (self.height, self.width):
            raise UnsupportedFormat(
                f"pixel array {px.shape} does not match {self.height}x{self.width}"
            )
        if not np.all(np.isfinite(px)):
            raise UnsupportedFormat("image has non-finite intensities")
        px = np.clip(px, 0.0, 1.0)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, pixels) -> "GrayscaleImage":
        px = np.asarray(pixels, dtype=np.float64)
        if px.ndim != 2:
            raise UnsupportedFormat(f"image must be 2-d, got shape {px.shape}")
        return cls(px.shape[1], px.shape[0], px)


# --- readers -------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that ends the last one.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise UnsupportedFormat("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> GrayscaleImage:
    """Parse a P2 or P5 PGM file; intensities are scaled by ``maxval``."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4)
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise UnsupportedFormat(f"malformed PGM header in {path}") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise UnsupportedFormat(f"bad PGM dimensions or maxval in {path}")
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        raw = np.frombuffer(data, dtype=dtype, count=-1, offset=min(offset, len(data)))
        if raw.size < count:
            raise UnsupportedFormat(f"PGM raster in {path} is truncated")
        values = raw[:count].astype(np.float64)
    elif magic == b"P2":
        body = re.sub(rb"#[^\r\n]*", b" ", data[offset - 1:]).split()
        if len(body) < count:
            raise UnsupportedFormat(f"PGM raster in {path} is truncated")
        try:
            values = np.array([int(t) for t in body[:count]], dtype=np.float64)
        except ValueError as exc:
            raise UnsupportedFormat(f"non-integer sample in {path}") from exc
    else:
        raise UnsupportedFormat(f"{path} is not a P2/P5 PGM file (magic {magic!r})")
    return GrayscaleImage(width, height, values.reshape(height, width) / maxval)


def read_csv_image(path) -> GrayscaleImage:
    """A comma-separated matrix of intensities in [0, 1]."""
    try:
        px = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise UnsupportedFormat(f"cannot parse {path} as a numeric CSV matrix") from exc
    return GrayscaleImage.from_array(px)


def read_image(path) -> GrayscaleImage:
    if not os.path.isfile(path):
        raise FileNotFound(f"no such file: {path}")
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pgm":
        return read_pgm(path)
    if ext in (".csv", ".txt"):
        return read_csv_image(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head in (b"P2", b"P5"):
        return read_pgm(path)
    raise UnsupportedFormat(f"unsupported image format: {path}")


def write_pgm(path, image: GrayscaleImage, maxval: int = 255):
    """Write a binary P5 file."""
    q = np.rint(image.pixels * maxval)
    dtype = ">u2" if maxval > 255 else np.uint8
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (image.width, image.height, maxval))
        fh.write(q.astype(dtype).tobytes())


# --- resampling and measures -------------------------------------------


def subsample(image: GrayscaleImage, side: int) -> GrayscaleImage:
    """Bilinear resampling onto a ``side x side`` lattice spanning the image."""
    if side < 1:
        raise ConfigInvalid(f"side must be positive, got {side}")
    if image.pixels.shape == (side, side):
        return image
    rows = np.linspace(0.0, image.height - 1, side)
    cols = np.linspace(0.0, image.width - 1, side)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(image.pixels, [rr, cc], order=1, mode="nearest")
    return GrayscaleImage(side, side, out)


def image_measure(image: GrayscaleImage, spacing: float = 1.0, power: int = 1) -> DiscreteMeasure:
    """Normalized intensities of a square image on a 2D grid (column-major vec)."""
    if image.width != image.height:
        raise ConfigInvalid(f"image must be square, got {image.height}x{image.width}")
    grid = UniformGrid2D(image.width, spacing, power)
    w = grid.vec(image.pixels)
    total = w.sum()
    if not total > 0:
        raise ZeroMassImage("image has no positive intensity after subsampling")
    return DiscreteMeasure(w / total, grid)


def load_image(path, side: int, spacing: float = 1.0, power: int = 1):
    """Read, subsample to ``side x side`` and normalize.

    Returns
    -------
    image : GrayscaleImage
        The subsampled image.
    measure : DiscreteMeasure
    """
    image = subsample(read_image(path), side)
    return image, image_measure(image, spacing, power)


def gray_level_cost(source: GrayscaleImage, target: GrayscaleImage) -> FeatureCost:
    """``|g_i - g_p|`` between pixel gray levels, in vec order."""
    a = source.pixels.reshape(-1, order="F")
    b = target.pixels.reshape(-1, order="F")
    return FeatureCost(np.abs(a[:, None] - b[None, :]))


# --- on-grid transformations -------------------------------------------


def translate(image: GrayscaleImage, rows: int, cols: int) -> GrayscaleImage:
    """Shift by whole pixels; uncovered pixels become zero."""
    src = image.pixels
    out = np.zeros_like(src)
    h, w = src.shape
    r0, r1 = max(rows, 0), min(h + rows, h)
    c0, c1 = max(cols, 0), min(w + cols, w)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = src[r0 - rows:r1 - rows, c0 - cols:c1 - cols]
    return GrayscaleImage(w, h, out)


def rotate90(image: GrayscaleImage, quarter_turns: int = 1) -> GrayscaleImage:
    """Counter-clockwise rotation in 90 degree steps (stays on the grid)."""
    return GrayscaleImage.from_array(np.rot90(image.pixels, quarter_turns))


def reflect(image: GrayscaleImage) -> GrayscaleImage:
    """Horizontal mirror image."""
    return GrayscaleImage.from_array(image.pixels[:, ::-1])


TRANSFORMS = {
    "translation": lambda im: translate(im, 0, 4),
    "rotation": rotate90,
    "reflection": reflect,
}


# --- synthetic stand-ins -----------------------------------------------


def _stroke(h, w, path, thickness):
    # soft-edged polyline rendered from the distance to its segments
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    dist = np.full((h, w), np.inf)
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        dr, dc = r1 - r0, c1 - c0
        t = ((rr - r0) * dr + (cc - c0) * dc) / max(dr * dr + dc * dc, 1e-12)
        t = np.clip(t, 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(rr - r0 - t * dr, cc - c0 - t * dc))
    return np.clip(thickness + 0.5 - dist, 0.0, 1.0)


def synthetic_digit(side: int = 28) -> GrayscaleImage:
    """A handwriting-like "3" in the MNIST layout (white on black, 28x28)."""
    s = side / 28.0
    # two arcs open to the left; angle 0 points right, positive angles point down
    up = np.linspace(-0.85 * np.pi, 0.5 * np.pi, 14)
    upper = [(9 * s + 5 * s * np.sin(a), 13 * s + 5.5 * s * np.cos(a)) for a in up]
    low = np.linspace(-0.5 * np.pi, 0.85 * np.pi, 14)
    lower = [(19 * s + 5 * s * np.sin(a), 13 * s + 6 * s * np.cos(a)) for a in low]
    px = np.maximum(_stroke(side, side, upper, 1.2 * s), _stroke(side, side, lower, 1.2 * s))
    return GrayscaleImage(side, side, px)


def synthetic_horses(side: int = 100):
    """Two frames of a stylized galloping silhouette (legs and head move).

    Stand-in for user-supplied horse frames; any pair of related grayscale
    images can be used instead.
    """
    s = side / 100.0
    rr, cc = np.mgrid[0:side, 0:side].astype(np.float64)

    def frame(leg_swing, head_drop):
        body = ((rr - 45 * s) / (13 * s)) ** 2 + ((cc - 50 * s) / (27 * s)) ** 2 <= 1.0
        px = body.astype(np.float64)
        neck = [(42 * s, 72 * s), (26 * s + head_drop * s, 82 * s), (30 * s + head_drop * s, 92 * s)]
        tail = [(40 * s, 24 * s), (50 * s, 14 * s)]
        legs = []
        for base, swing in ((32, -leg_swing), (40, leg_swing), (60, leg_swing), (68, -leg_swing)):
            legs.append([(52 * s, base * s), (70 * s, (base + swing / 2) * s),
                         (85 * s, (base + swing) * s)])
        for path, width in [(neck, 4.0), (tail, 2.0)] + [(leg, 2.5) for leg in legs]:
            px = np.maximum(px, _stroke(side, side, path, width * s))
        return GrayscaleImage(side, side, 0.85 * px)

    return frame(6.0, 0.0), frame(-4.0, 5.0)
