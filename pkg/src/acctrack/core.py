"""Shared types, unit conversions and CSV formats.

Units: positions are stored in micrometres and time in seconds, so internal
velocities are µm/s and accelerations µm/s². Files and configs speak mm/s and
mm/s²; the helpers below are the only place the factor of 1000 appears.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

UM_PER_MM = 1000.0


def mm_to_um(value):
    return value * UM_PER_MM


def um_to_mm(value):
    return value / UM_PER_MM


# mm/s -> µm/s and mm/s² -> µm/s² share the same factor since time stays in s.
speed_to_internal = mm_to_um
speed_from_internal = um_to_mm
accel_to_internal = mm_to_um
accel_from_internal = um_to_mm


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(ValueError):
    """Invalid configuration value."""


@dataclass(frozen=True)
class Localization:
    frame: int
    x: float
    y: float
    gt_id: int | None = None

    def __post_init__(self):
        if self.frame < 0:
            raise DataError(f"frame index must be >= 0, got {self.frame}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError("localization coordinates must be finite")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrameSeq:
    """Per-frame localisations sampled at a constant frame rate.

    ``xy[k]`` is an ``(n_k, 2)`` array of positions in µm for frame ``k``;
    ``gt_id[k]`` holds simulator identities or is ``None`` for real data.
    """

    frame_rate: float
    xy: tuple[np.ndarray, ...]
    gt_id: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise DataError(f"frame_rate must be positive, got {self.frame_rate}")
        xy = tuple(_frozen(np.asarray(f, dtype=float).reshape(-1, 2)) for f in self.xy)
        for f in xy:
            if not np.all(np.isfinite(f)):
                raise DataError("localization coordinates must be finite")
        object.__setattr__(self, "xy", xy)
        if self.gt_id is not None:
            ids = tuple(_frozen(np.asarray(g, dtype=np.int64).reshape(-1)) for g in self.gt_id)
            if len(ids) != len(xy) or any(len(g) != len(f) for g, f in zip(ids, xy)):
                raise DataError("gt_id must align with xy")
            object.__setattr__(self, "gt_id", ids)

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def n_frames(self) -> int:
        return len(self.xy)

    @property
    def n_localizations(self) -> int:
        return sum(len(f) for f in self.xy)

    def localizations(self) -> Iterator[Localization]:
        for k, pts in enumerate(self.xy):
            ids = self.gt_id[k] if self.gt_id is not None else None
            for i, (x, y) in enumerate(pts):
                yield Localization(k, float(x), float(y), None if ids is None else int(ids[i]))

    def subsample(self, start: int, step: int) -> FrameSeq:
        """Frames ``start, start+step, ...`` reindexed densely at ``frame_rate/step``."""
        idx = range(start, self.n_frames, step)
        gt = None if self.gt_id is None else tuple(self.gt_id[k] for k in idx)
        return FrameSeq(self.frame_rate / step, tuple(self.xy[k] for k in idx), gt)


class Link(NamedTuple):
    """Pairing of localisation ``a`` in ``frame`` with ``b`` in ``frame + 1``."""

    frame: int
    a: int
    b: int


class LinkSource(str, Enum):
    ground_truth = "ground_truth"
    tracker = "tracker"


@dataclass(frozen=True)
class LinkSet:
    links: frozenset[Link]
    source: LinkSource = LinkSource.tracker

    def __init__(self, links: Iterable[Link | tuple] = (), source=LinkSource.tracker):
        object.__setattr__(self, "links", frozenset(Link(*map(int, l)) for l in links))
        object.__setattr__(self, "source", LinkSource(source))
        seen_a, seen_b = set(), set()
        for l in self.links:
            if (l.frame, l.a) in seen_a or (l.frame, l.b) in seen_b:
                raise DataError(f"link {tuple(l)} breaks the one-to-one constraint")
            seen_a.add((l.frame, l.a))
            seen_b.add((l.frame, l.b))

    def __len__(self):
        return len(self.links)

    def __iter__(self):
        return iter(sorted(self.links))

    def __contains__(self, item):
        return Link(*item) in self.links

    def validate(self, seq: FrameSeq):
        for l in self.links:
            if not (0 <= l.frame < seq.n_frames - 1):
                raise DataError(f"link {tuple(l)} references frame outside the sequence")
            if not (0 <= l.a < len(seq.xy[l.frame]) and 0 <= l.b < len(seq.xy[l.frame + 1])):
                raise DataError(f"link {tuple(l)} references a missing localization")

    def lengths(self, seq: FrameSeq) -> np.ndarray:
        """Euclidean length (µm) of every link, in sorted link order."""
        links = sorted(self.links)
        if not links:
            return np.zeros(0)
        return np.array([np.hypot(*(seq.xy[l.frame + 1][l.b] - seq.xy[l.frame][l.a])) for l in links])


class InitMode(str, Enum):
    paper_literal = "paper_literal"
    kinematic = "kinematic"


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker tuning, in file units (mm/s, mm/s², µm)."""

    sigma_a: float = 50.0          # mm/s²
    r_std: float = 10.0            # µm
    v_max: float = 20.0            # mm/s, gate = v_max * dt
    init_cost_max: float = 0.5
    min_track_len: int = 3
    a_init_mode: InitMode = InitMode.kinematic

    def __post_init__(self):
        object.__setattr__(self, "a_init_mode", InitMode(self.a_init_mode))
        for name in ("sigma_a", "r_std", "v_max", "init_cost_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.min_track_len < 2:
            raise ConfigError("min_track_len must be >= 2")

    def gate(self, dt: float) -> float:
        """Maximum link length in µm for a frame interval ``dt``."""
        return speed_to_internal(self.v_max) * dt


@dataclass
class TrackRecord:
    """A finished track as stored on disk: per-point frame, position and kinematics.

    Positions in µm, velocities in µm/s, accelerations in µm/s² (internal units).
    """

    track_id: int
    frames: np.ndarray
    xy: np.ndarray
    v: np.ndarray = field(default=None)
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        n = len(self.xy)
        self.v = np.zeros((n, 2)) if self.v is None else np.asarray(self.v, dtype=float).reshape(-1, 2)
        self.a = np.zeros((n, 2)) if self.a is None else np.asarray(self.a, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.xy)


# ---------------------------------------------------------------- file formats

def _parse_header(line: str) -> dict[str, str]:
    body = line.lstrip("#").strip()
    out = {}
    for part in body.replace(",", " ").split():
        if "=" in part:
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_localizations(path) -> FrameSeq:
    path = Path(path)
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DataError(f"{path}: line 1: missing '# frame_rate_hz=<f>' header")
    meta = _parse_header(lines[0])
    try:
        frame_rate = float(meta["frame_rate_hz"])
    except (KeyError, ValueError):
        raise DataError(f"{path}: line 1: header does not declare frame_rate_hz") from None
    n_declared = int(meta.get("n_frames", 0))

    rows: list[tuple[int, float, float, int | None]] = []
    has_gt = False
    last_frame = -1
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("frame"):
            has_gt = "gt_id" in line
            continue
        parts = line.split(",")
        try:
            if len(parts) not in (3, 4):
                raise ValueError("expected 3 or 4 fields")
            frame = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
            gt = int(parts[3]) if len(parts) == 4 and parts[3].strip() else None
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: malformed row ({exc})") from None
        if frame < 0:
            raise DataError(f"{path}: line {lineno}: negative frame index {frame}")
        if frame < last_frame:
            raise DataError(f"{path}: line {lineno}: frame {frame} after frame {last_frame}")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DataError(f"{path}: line {lineno}: non-finite coordinate")
        last_frame = frame
        rows.append((frame, x, y, gt))

    n_frames = max(n_declared, last_frame + 1)
    buckets: list[list] = [[] for _ in range(n_frames)]
    for r in rows:
        buckets[r[0]].append(r)
    xy = tuple(np.array([(r[1], r[2]) for r in b], dtype=float).reshape(-1, 2) for b in buckets)
    gt_ids = None
    if has_gt and rows:
        if any(r[3] is None for r in rows):
            raise DataError(f"{path}: gt_id column present but some rows lack it")
        gt_ids = tuple(np.array([r[3] for r in b], dtype=np.int64) for b in buckets)
    return FrameSeq(frame_rate, xy, gt_ids)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_localizations(seq: FrameSeq, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# frame_rate_hz={_fmt(seq.frame_rate)} n_frames={seq.n_frames} units=um\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "x_um", "y_um"] + (["gt_id"] if seq.gt_id is not None else []))
        for k, pts in enumerate(seq.xy):
            for i, (x, y) in enumerate(pts):
                row = [k, _fmt(x), _fmt(y)]
                if seq.gt_id is not None:
                    row.append(int(seq.gt_id[k][i]))
                w.writerow(row)


TRACK_COLUMNS = ["track_id", "frame", "x", "y", "vx", "vy", "ax", "ay"]


def write_tracks(tracks: Sequence, path, frame_rate: float | None = None) -> None:
    """Write tracks as CSV rows ``track_id, frame, x, y, vx, vy, ax, ay``.

    Accepts :class:`TrackRecord` objects or anything with a ``record()`` method
    (live tracker tracks). Positions in µm, velocity in mm/s, acceleration in mm/s².
    """
    path = Path(path)
    try:
        fh = path.open("w", newline="")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None
    with fh:
        if frame_rate is not None:
            fh.write(f"# frame_rate_hz={_fmt(frame_rate)} units=um,mm/s,mm/s2\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for t in tracks:
            rec = t if isinstance(t, TrackRecord) else t.record()
            v = speed_from_internal(rec.v)
            a = accel_from_internal(rec.a)
            for i in range(len(rec)):
                w.writerow([rec.track_id, int(rec.frames[i]), _fmt(rec.xy[i, 0]), _fmt(rec.xy[i, 1]),
                            _fmt(v[i, 0]), _fmt(v[i, 1]), _fmt(a[i, 0]), _fmt(a[i, 1])])


def read_tracks(path) -> tuple[list[TrackRecord], float | None]:
    """Inverse of :func:`write_tracks`; returns records and the header frame rate if any."""
    path = Path(path)
    frame_rate = None
    grouped: dict[int, list[list[float]]] = {}
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta = _parse_header(line)
                if "frame_rate_hz" in meta:
                    frame_rate = float(meta["frame_rate_hz"])
                continue
            if line.startswith("track_id"):
                continue
            parts = line.split(",")
            if len(parts) != len(TRACK_COLUMNS):
                raise DataError(f"{path}: line {lineno}: expected {len(TRACK_COLUMNS)} fields")
            try:
                tid = int(parts[0])
                grouped.setdefault(tid, []).append([float(p) for p in parts[1:]])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed row") from None
    records = []
    for tid, rows in grouped.items():
        arr = np.array(rows)
        records.append(TrackRecord(tid, arr[:, 0].astype(np.int64), arr[:, 1:3],
                                   speed_to_internal(arr[:, 3:5]), accel_to_internal(arr[:, 5:7])))
    return records, frame_rate


def write_links(links: LinkSet, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# source={links.source.value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "a", "b"])
        for l in links:
            w.writerow(list(l))


def read_links(path) -> LinkSet:
    path = Path(path)
    source = LinkSource.tracker
    links = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                source = LinkSource(_parse_header(line).get("source", source.value))
                continue
            if line.startswith("frame"):
                continue
            try:
                f, a, b = (int(p) for p in line.split(","))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed link row") from None
            links.append(Link(f, a, b))
    return LinkSet(links, source)


def load_config(path) -> dict:
    """Read a TOML config file into nested dicts (one table per module)."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
