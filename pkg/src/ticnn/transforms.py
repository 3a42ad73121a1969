"""Image transforms: affine warps, mosaic-padded translation, cyclic shifts, aperture.

Images are float64 arrays shaped (channels, height, width) or batches
(n, channels, height, width); transforms act on the trailing two axes.

Affine warps use inverse mapping about the pixel-grid center: for output
coordinate q the source is ``M @ (q - c) + b + c``. A translation by
(dx, dy) therefore stores an offset of (-dx, -dy), and a rotation matrix
is built from -theta so the image content rotates by +theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import DimensionError, as_image_batch


@dataclass(frozen=True)
class AffineParams:
    """Inverse-map affine transform: source = matrix @ (coord - center) + offset + center.

    ``matrix`` is a 2x2 array over (x, y) coordinates; ``offset`` is (dx, dy)
    in pixels applied in source space. ``interp`` selects 'nearest' or
    'bilinear' sampling; ``fill`` selects 'zero' or 'mosaic' (modular wrap)
    handling of out-of-bounds sources. The matrix must be invertible.
    """

    matrix: tuple[tuple[float, float], tuple[float, float]]
    offset: tuple[float, float]
    interp: str = "bilinear"
    fill: str = "zero"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 2):
            raise DimensionError(f"matrix must be 2x2, got shape {m.shape}")
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= 1e-9:
            raise ValueError(f"affine matrix is singular (det {det:.3e})")
        if len(self.offset) != 2:
            raise DimensionError(f"offset must have 2 entries, got {len(self.offset)}")
        if self.interp not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interp {self.interp!r}")
        if self.fill not in ("zero", "mosaic"):
            raise ValueError(f"unknown fill {self.fill!r}")


@dataclass(frozen=True)
class GridSpec:
    """Displacement grid: shifts -max_shift..max_shift in the chosen axes.

    The step must divide max_shift so the (0, 0) center is always a cell.
    """

    max_shift: int
    step: int = 1
    axes: str = "both"

    def __post_init__(self):
        if self.max_shift < 0:
            raise ValueError(f"max_shift must be >= 0, got {self.max_shift}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.axes not in ("horizontal", "vertical", "both"):
            raise ValueError(f"unknown axes {self.axes!r}")
        if self.max_shift % self.step != 0:
            raise ValueError(
                f"step {self.step} must divide max_shift {self.max_shift} "
                "so the grid includes the center"
            )

    def displacements(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(shifts_x, shifts_y) covering the grid; each includes 0."""
        span = tuple(range(-self.max_shift, self.max_shift + 1, self.step))
        sx = span if self.axes in ("horizontal", "both") else (0,)
        sy = span if self.axes in ("vertical", "both") else (0,)
        return sx, sy

    def center_index(self) -> tuple[int, int]:
        """(iy, ix) of the zero-displacement cell."""
        sx, sy = self.displacements()
        return sy.index(0), sx.index(0)


def make_translation(dx: float, dy: float, interp: str = "bilinear", fill: str = "zero") -> AffineParams:
    """Shift image content by (dx, dy) pixels (positive dx moves content right)."""
    return AffineParams(((1.0, 0.0), (0.0, 1.0)), (-float(dx), -float(dy)), interp, fill)


def make_rotation(theta_deg: float, interp: str = "bilinear", fill: str = "zero") -> AffineParams:
    """Rotate image content by theta degrees counterclockwise about the center."""
    t = np.deg2rad(-float(theta_deg))
    c, s = float(np.cos(t)), float(np.sin(t))
    return AffineParams(((c, -s), (s, c)), (0.0, 0.0), interp, fill)


def make_scale(factor: float, interp: str = "bilinear", fill: str = "zero") -> AffineParams:
    """Scale image content by ``factor`` about the center (>1 magnifies)."""
    f = float(factor)
    if f <= 0:
        raise ValueError(f"scale factor must be positive, got {f}")
    inv = 1.0 / f
    return AffineParams(((inv, 0.0), (0.0, inv)), (0.0, 0.0), interp, fill)


def make_affine(kind: str, amount, interp: str = "bilinear", fill: str = "zero") -> AffineParams:
    """Build AffineParams by name: 'translation' (dx, dy), 'rotation' deg, 'scale' factor."""
    if kind == "translation":
        dx, dy = amount
        return make_translation(dx, dy, interp, fill)
    if kind == "rotation":
        return make_rotation(float(amount), interp, fill)
    if kind == "scale":
        return make_scale(float(amount), interp, fill)
    raise ValueError(f"unknown transform kind {kind!r}")


def apply_affine(image, params: AffineParams) -> np.ndarray:
    """Warp an image (c,h,w) or batch (n,c,h,w) by the given inverse-map affine."""
    batch, had_batch = as_image_batch(image)
    n, c, h, w = batch.shape
    m = np.asarray(params.matrix, dtype=np.float64)
    bx, by = float(params.offset[0]), float(params.offset[1])
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    ys, xs = np.mgrid[0:h, 0:w]
    qx = xs - cx
    qy = ys - cy
    sx = m[0, 0] * qx + m[0, 1] * qy + bx + cx
    sy = m[1, 0] * qx + m[1, 1] * qy + by + cy

    if params.interp == "nearest":
        ix = np.rint(sx).astype(np.int64)
        iy = np.rint(sy).astype(np.int64)
        out = _gather(batch, iy, ix, params.fill)
    else:
        x0 = np.floor(sx).astype(np.int64)
        y0 = np.floor(sy).astype(np.int64)
        fx = sx - x0
        fy = sy - y0
        v00 = _gather(batch, y0, x0, params.fill)
        v01 = _gather(batch, y0, x0 + 1, params.fill)
        v10 = _gather(batch, y0 + 1, x0, params.fill)
        v11 = _gather(batch, y0 + 1, x0 + 1, params.fill)
        out = (
            v00 * (1 - fy) * (1 - fx)
            + v01 * (1 - fy) * fx
            + v10 * fy * (1 - fx)
            + v11 * fy * fx
        )
    return out if had_batch else out[0]


def _gather(batch: np.ndarray, iy: np.ndarray, ix: np.ndarray, fill: str) -> np.ndarray:
    """Sample batch at integer (iy, ix) grids with the requested boundary rule."""
    n, c, h, w = batch.shape
    if fill == "mosaic":
        return batch[:, :, iy % h, ix % w]
    inside = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    vals = batch[:, :, np.clip(iy, 0, h - 1), np.clip(ix, 0, w - 1)]
    return np.where(inside, vals, 0.0)


def translate_mosaic(image, dx: int, dy: int) -> np.ndarray:
    """Translate by integer pixels over a 3x3 tiled copy of the image, then re-crop.

    Positive dx moves content right, positive dy moves content down. Shifts
    must stay within the tiled canvas: |dx| < 2*width and |dy| < 2*height.
    """
    if dx != int(dx) or dy != int(dy):
        raise ValueError(f"mosaic translation needs integer shifts, got ({dx}, {dy})")
    dx, dy = int(dx), int(dy)
    batch, had_batch = as_image_batch(image)
    n, c, h, w = batch.shape
    if abs(dx) >= 2 * w or abs(dy) >= 2 * h:
        raise ValueError(
            f"shift ({dx}, {dy}) exceeds the tiled canvas for a {h}x{w} image"
        )
    tiled = np.tile(batch, (1, 1, 3, 3))
    # Content moving right/down means the crop window moves left/up in the canvas.
    top = h + (-dy) % h
    left = w + (-dx) % w
    out = tiled[:, :, top : top + h, left : left + w]
    return out if had_batch else out[0]


def circular_shift(image, dx: int, dy: int) -> np.ndarray:
    """Cyclically shift content by integer pixels (positive dx right, dy down)."""
    batch, had_batch = as_image_batch(image)
    out = np.roll(batch, shift=(int(dy), int(dx)), axis=(2, 3))
    return out if had_batch else out[0]


def apply_aperture(image, radius: float | None = None, softness: float = 4.0) -> np.ndarray:
    """Fade the image border into its per-channel mean inside a circular window.

    Pixels within ``radius - softness`` of the center are untouched; beyond
    ``radius`` they equal the channel mean; between, a raised-cosine blend.
    ``radius`` defaults to half the smaller image side.
    """
    batch, had_batch = as_image_batch(image)
    n, c, h, w = batch.shape
    if radius is None:
        radius = min(h, w) / 2.0
    radius = float(radius)
    softness = float(softness)
    if radius <= 0:
        raise ValueError(f"aperture radius must be positive, got {radius}")
    if softness < 0:
        raise ValueError(f"aperture softness must be nonnegative, got {softness}")

    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    r = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    if softness == 0:
        mask = (r <= radius).astype(np.float64)
    else:
        t = np.clip((radius - r) / softness, 0.0, 1.0)
        mask = 0.5 - 0.5 * np.cos(np.pi * t)
    mean = batch.mean(axis=(2, 3), keepdims=True)
    blend = batch * mask + mean * (1.0 - mask)
    # Keep interior pixels bit-identical rather than multiplied by mask == 1.
    out = np.where(mask == 1.0, batch, blend)
    return out if had_batch else out[0]
