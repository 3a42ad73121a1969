"""On-disk formats: weight archives, deterministic CSVs, PPM heatmaps, manifests.

Everything written here is byte-reproducible for a fixed config: floats are
formatted with '%.12g', decimals use '.', lines end with '\\n', and manifests
carry no timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
import sys
from pathlib import Path

import numpy as np

from .perceptual import ResponseCurve

WEIGHT_MAGIC = b"TICNN1"

SCALINGS = ("independent", "joint")


class WeightFormatError(ValueError):
    """Malformed or truncated weight archive."""


def fmt_float(x: float) -> str:
    return format(float(x), ".12g")


def save_weights(path, weights) -> None:
    """Write named arrays to a little-endian archive with float32 payloads.

    ``weights`` is a name -> array mapping or a ParameterStore.
    """
    if hasattr(weights, "names"):
        weights = {p.name: p.value for p in weights}
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        for name, value in weights.items():
            blob = name.encode("utf-8")
            arr = np.asarray(value, dtype="<f4")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_weights(path) -> dict[str, np.ndarray]:
    """Read a weight archive back into a name -> float64 array dict."""
    data = Path(path).read_bytes()
    if not data.startswith(WEIGHT_MAGIC):
        raise WeightFormatError(f"bad magic {data[:6]!r}, expected {WEIGHT_MAGIC!r}")
    pos = len(WEIGHT_MAGIC)
    out: dict[str, np.ndarray] = {}

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise WeightFormatError(f"truncated archive while reading {what}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    while pos < len(data):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        count = 1
        for d in dims:
            count *= d
        payload = take(4 * count, f"payload of {name!r}")
        if name in out:
            raise WeightFormatError(f"duplicate entry {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
    return out


def assign_weights(store, weights: dict[str, np.ndarray]) -> None:
    """Load archive contents into a ParameterStore, checking names and shapes."""
    want = set(store.names())
    have = set(weights)
    if want != have:
        missing = sorted(want - have)
        extra = sorted(have - want)
        raise WeightFormatError(
            f"archive does not match the model: missing {missing}, extra {extra}"
        )
    for name in store.names():
        value = weights[name]
        if value.shape != store[name].value.shape:
            raise WeightFormatError(
                f"parameter {name!r} has shape {value.shape}, "
                f"expected {store[name].value.shape}"
            )
        store[name].value = value.copy()


def write_grid_csv(path, values, shifts_x, shifts_y) -> None:
    """Matrix-layout grid: header row of dx values, first column dy values."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (len(shifts_y), len(shifts_x)):
        raise ValueError(
            f"values shape {v.shape} does not match {len(shifts_y)} x {len(shifts_x)} shifts"
        )
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dy\\dx"] + [int(dx) for dx in shifts_x])
        for iy, dy in enumerate(shifts_y):
            w.writerow([int(dy)] + [fmt_float(x) for x in v[iy]])


def read_grid_csv(path) -> tuple[np.ndarray, tuple[int, ...], tuple[int, ...]]:
    """Inverse of write_grid_csv: (values, shifts_x, shifts_y)."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][0] != "dy\\dx" or len(rows) < 2:
        raise ValueError(f"{path} is not a displacement-grid CSV")
    sx = tuple(int(c) for c in rows[0][1:])
    sy = tuple(int(r[0]) for r in rows[1:])
    values = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    if values.shape != (len(sy), len(sx)):
        raise ValueError(f"{path} has ragged rows")
    return values, sx, sy


def write_curve_csv(path, curve: ResponseCurve) -> None:
    """One response curve as level,value rows."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["level", "value"])
        for lv, va in zip(curve.levels, curve.values):
            w.writerow([fmt_float(lv), fmt_float(va)])


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ["level", "value"]:
        raise ValueError(f"{path} is not a response-curve CSV")
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    if body.size == 0:
        return np.zeros(0), np.zeros(0)
    return body[:, 0], body[:, 1]


def write_judgments_csv(path, judgments) -> None:
    j = np.asarray(judgments, dtype=np.int64)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["i", "j", "k", "l", "choice"])
        for row in j:
            w.writerow([int(v) for v in row])


def read_judgments_csv(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ["i", "j", "k", "l", "choice"]:
        raise ValueError(f"{path} is not a judgments CSV")
    return np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64)


VIRIDIS_ANCHORS = (
    (68, 1, 84),
    (72, 40, 120),
    (62, 74, 137),
    (49, 104, 142),
    (38, 130, 142),
    (31, 158, 137),
    (53, 183, 121),
    (109, 205, 89),
    (180, 222, 44),
    (253, 231, 37),
)


def value_to_rgb(v: float) -> tuple[int, int, int]:
    """Map a value in [0, 1] onto the anchor ramp with linear interpolation."""
    t = min(1.0, max(0.0, float(v))) * (len(VIRIDIS_ANCHORS) - 1)
    i = min(int(t), len(VIRIDIS_ANCHORS) - 2)
    f = t - i
    a, b = VIRIDIS_ANCHORS[i], VIRIDIS_ANCHORS[i + 1]
    return tuple(int(round(a[c] + f * (b[c] - a[c]))) for c in range(3))


def _grid_values(grid) -> np.ndarray:
    g = np.asarray(getattr(grid, "values", grid), dtype=np.float64)
    if g.ndim != 2 or g.size == 0:
        raise ValueError(f"heatmap needs a nonempty 2-D grid, got shape {g.shape}")
    return g


def joint_bounds(grids) -> tuple[float, float]:
    """(min, max) over the union of all cells, for joint-scaled heatmap families."""
    arrays = [_grid_values(g) for g in grids]
    if not arrays:
        raise ValueError("joint_bounds needs at least one grid")
    return min(float(a.min()) for a in arrays), max(float(a.max()) for a in arrays)


def write_heatmap(grid, path, scaling: str = "independent", bounds=None, cell_size: int = 1) -> Path:
    """Render a 2-D grid as a binary PPM plus a raw-value CSV sidecar.

    'independent' scales colors to this grid's own min/max; 'joint' uses
    ``bounds`` computed over a grid family (see joint_bounds) so colors are
    comparable across files. A constant grid renders at the ramp maximum.
    Returns the sidecar path (suffix '.values.csv', raw values).
    """
    g = _grid_values(grid)
    if scaling not in SCALINGS:
        raise ValueError(f"scaling must be one of {SCALINGS}, got {scaling!r}")
    if cell_size < 1:
        raise ValueError(f"cell_size must be >= 1, got {cell_size}")
    if scaling == "joint":
        if bounds is None:
            raise ValueError("joint scaling needs bounds=(lo, hi) over the grid family")
        lo, hi = float(bounds[0]), float(bounds[1])
    else:
        lo, hi = float(g.min()), float(g.max())
    if hi > lo:
        unit = np.clip((g - lo) / (hi - lo), 0.0, 1.0)
    else:
        unit = np.ones_like(g)
    rows, cols = g.shape
    pixels = np.zeros((rows * cell_size, cols * cell_size, 3), dtype=np.uint8)
    for iy in range(rows):
        for ix in range(cols):
            pixels[
                iy * cell_size : (iy + 1) * cell_size,
                ix * cell_size : (ix + 1) * cell_size,
            ] = value_to_rgb(unit[iy, ix])
    path = Path(path)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (pixels.shape[1], pixels.shape[0]))
        f.write(pixels.tobytes())
    sidecar = path.with_suffix(".values.csv")
    with open(sidecar, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        for iy in range(rows):
            w.writerow([fmt_float(v) for v in g[iy]])
    return sidecar


def read_ppm_size(path) -> tuple[int, int]:
    """(width, height) of a binary P6 file; validates the header."""
    data = Path(path).read_bytes()
    fields = data.split(maxsplit=4)
    if len(fields) < 4 or fields[0] != b"P6":
        raise ValueError(f"{path} is not a binary PPM")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"{path} has unsupported maxval {maxval}")
    return width, height


def config_digest(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(path, experiment: str, config: dict) -> None:
    """Record what produced a result directory; deliberately no timestamps."""
    import scipy

    from . import __version__

    manifest = {
        "experiment": experiment,
        "config": config,
        "config_sha256": config_digest(config),
        "seed": config.get("seed"),
        "versions": {
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "ticnn": __version__,
        },
    }
    with open(path, "w", newline="") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
