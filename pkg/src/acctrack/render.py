"""Super-resolved rasters built from densified tracks.

Three channels are supported: sample density, mean speed and signed mean
speed gradient. Maps export as 16-bit binary PGM (P5) with the value scale in
``#`` comments, or as exact CSV matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import DataError

PGM_MAX = 65535


class Channel(str, Enum):
    density = "density"
    speed = "speed"
    speed_gradient = "speed_gradient"


class MapFormat(str, Enum):
    pgm16 = "pgm16"
    csv = "csv"


@dataclass
class FieldMap:
    """Accumulator for one channel on a regular grid.

    Row ``r``, column ``c`` covers ``x in [x0 + c*pixel, x0 + (c+1)*pixel)`` and
    the matching ``y`` range. ``sums`` holds the per-pixel sum of the channel
    quantity (unused for density) and ``counts`` the number of samples.
    """

    origin: tuple[float, float]
    pixel: float
    width: int
    height: int
    channel: Channel = Channel.density
    sums: np.ndarray = field(default=None, repr=False)
    counts: np.ndarray = field(default=None, repr=False)
    dropped: int = 0

    def __post_init__(self):
        if not self.pixel > 0:
            raise ValueError("pixel must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("map must be at least one pixel wide and high")
        self.channel = Channel(self.channel)
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        shape = (self.height, self.width)
        if self.sums is None:
            self.sums = np.zeros(shape)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        """Density counts, or count-weighted means with empty pixels at 0."""
        if self.channel is Channel.density:
            return self.counts.astype(float)
        out = np.zeros_like(self.sums)
        np.divide(self.sums, self.counts, out=out, where=self.counts > 0)
        return out

    def empty_like(self, channel: Channel | str | None = None) -> FieldMap:
        return FieldMap(self.origin, self.pixel, self.width, self.height,
                        self.channel if channel is None else Channel(channel))

    def merge(self, other: FieldMap) -> FieldMap:
        """Combine two partial accumulations of the same grid and channel."""
        if (other.origin, other.pixel, other.width, other.height, other.channel) != \
                (self.origin, self.pixel, self.width, self.height, self.channel):
            raise ValueError("maps differ in geometry or channel")
        return FieldMap(self.origin, self.pixel, self.width, self.height, self.channel,
                        self.sums + other.sums, self.counts + other.counts, self.dropped + other.dropped)

    def pixel_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row, column and in-extent mask for positions ``xy`` (µm)."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        col = np.floor((xy[:, 0] - self.origin[0]) / self.pixel)
        row = np.floor((xy[:, 1] - self.origin[1]) / self.pixel)
        ok = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        return row[ok].astype(np.int64), col[ok].astype(np.int64), ok


def fit_grid(points: Iterable, pixel: float = 5.0, margin: float = 0.05,
             channels=tuple(Channel)) -> dict[Channel, FieldMap]:
    """Empty maps whose extent covers ``points`` (arrays or dense tracks) plus ``margin``."""
    arrs = [np.asarray(getattr(p, "xy", p), dtype=float).reshape(-1, 2) for p in points]
    arrs = [a for a in arrs if len(a)]
    if not arrs:
        raise DataError("no samples to fit a map to")
    allxy = np.concatenate(arrs)
    lo, hi = allxy.min(axis=0), allxy.max(axis=0)
    pad = margin * np.maximum(hi - lo, pixel)
    lo, hi = lo - pad, hi + pad
    width = max(1, int(math.ceil((hi[0] - lo[0]) / pixel)))
    height = max(1, int(math.ceil((hi[1] - lo[1]) / pixel)))
    return {Channel(c): FieldMap((lo[0], lo[1]), pixel, width, height, Channel(c)) for c in channels}


def accumulate(maps, dense) -> None:
    """Deposit every sample of ``dense`` into each map (in place).

    ``maps`` is a single map, an iterable of maps or a dict of them.
    Samples outside a map's extent increase its ``dropped`` counter.
    """
    if isinstance(maps, FieldMap):
        maps = [maps]
    elif isinstance(maps, dict):
        maps = list(maps.values())
    for m in maps:
        row, col, ok = m.pixel_index(dense.xy)
        m.dropped += int(np.count_nonzero(~ok))
        np.add.at(m.counts, (row, col), 1)
        if m.channel is Channel.speed:
            np.add.at(m.sums, (row, col), np.asarray(dense.speed, dtype=float)[ok])
        elif m.channel is Channel.speed_gradient:
            np.add.at(m.sums, (row, col), np.asarray(dense.grad, dtype=float)[ok])


def render(dense_tracks, pixel: float = 5.0, margin: float = 0.05) -> dict[Channel, FieldMap]:
    dense_tracks = list(dense_tracks)
    maps = fit_grid(dense_tracks, pixel, margin)
    for d in dense_tracks:
        accumulate(maps, d)
    return maps


# ------------------------------------------------------------------- export

def _geometry(m: FieldMap) -> dict[str, str]:
    return {"channel": m.channel.value, "origin_x_um": repr(m.origin[0]), "origin_y_um": repr(m.origin[1]),
            "pixel_um": repr(float(m.pixel)), "width": str(m.width), "height": str(m.height)}


def quantize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Linear map of ``[min, max]`` onto ``0..65535``, rounding half up; flat input gives 0."""
    v = np.asarray(values, dtype=float)
    vmin, vmax = float(v.min()), float(v.max())
    if vmax > vmin:
        q = np.floor((v - vmin) / (vmax - vmin) * PGM_MAX + 0.5)
    else:
        q = np.zeros_like(v)
    return q.astype(">u2"), vmin, vmax


def write_pgm(values: np.ndarray, path, meta: dict[str, str] | None = None) -> None:
    q, vmin, vmax = quantize(values)
    _write_raw_pgm(q, path, dict(meta or {}, min=repr(vmin), max=repr(vmax)))


def read_pgm(path) -> tuple[np.ndarray, dict[str, str]]:
    """16-bit P5 pixels and the ``key=value`` pairs of its comment lines."""
    data = Path(path).read_bytes()
    pos, tokens, meta = 0, [], {}
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    meta[k] = v
        else:
            tokens += line.split()
    if tokens[0] != "P5" or int(tokens[3]) != PGM_MAX:
        raise DataError(f"{path}: not a 16-bit P5 PGM")
    width, height = int(tokens[1]), int(tokens[2])
    px = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos).reshape(height, width)
    return px, meta


def write_map(m: FieldMap, path, fmt: MapFormat | str = MapFormat.pgm16) -> None:
    fmt = MapFormat(fmt)
    if fmt is MapFormat.pgm16:
        write_pgm(m.values, path, _geometry(m))
        return
    with _open_out(path, "w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in _geometry(m).items()) + "\n")
        # 17 significant digits round-trip every double exactly
        np.savetxt(fh, m.values, fmt="%.17g", delimiter=",")


def write_gradient_pgms(m: FieldMap, prefix) -> tuple[Path, Path]:
    """Positive and negative parts of a signed map as two PGMs sharing one scale."""
    v = m.values
    scale = float(np.abs(v).max())
    meta = dict(_geometry(m), scale=repr(scale))
    paths = Path(f"{prefix}_pos.pgm"), Path(f"{prefix}_neg.pgm")
    for p, part in zip(paths, (np.maximum(v, 0.0), np.maximum(-v, 0.0))):
        if scale > 0:
            q = np.floor(part / scale * PGM_MAX + 0.5)
        else:
            q = np.zeros(part.shape)
        _write_raw_pgm(q, p, dict(meta, min="0.0", max=repr(scale)))
    return paths


def _write_raw_pgm(q: np.ndarray, path, meta: dict[str, str]) -> None:
    height, width = q.shape
    header = ["P5", "# " + " ".join(f"{k}={v}" for k, v in meta.items()), f"{width} {height}", str(PGM_MAX)]
    with _open_out(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(q.astype(">u2").tobytes())


def read_map_csv(path) -> tuple[np.ndarray, dict[str, str]]:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise DataError(f"{path}: line 1: missing geometry header")
        meta = dict(part.split("=", 1) for part in first[1:].split() if "=" in part)
        try:
            values = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{path}: malformed value ({exc})") from None
    shape = (int(meta["height"]), int(meta["width"]))
    if values.shape != shape:
        raise DataError(f"{path}: matrix is {values.shape}, header says {shape}")
    return values, meta


def _open_out(path, mode, **kw):
    try:
        return Path(path).open(mode, **kw)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None
