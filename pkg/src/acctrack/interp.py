"""Densify tracks between localisations and derive along-track speed gradients."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import (DataError, TrackRecord, accel_from_internal, accel_to_internal, speed_from_internal,
                   speed_to_internal)


class Method(str, Enum):
    linear = "linear"
    accel = "accel"


class Sampling(str, Enum):
    segment = "segment"  # each segment subdivided just enough for step_len
    track = "track"      # one time step for the whole track


class GradientPer(str, Enum):
    time = "time"          # mm/s per s (along-track acceleration)
    distance = "distance"  # mm/s per mm, i.e. 1/s


@dataclass
class DenseTrack:
    track_id: int
    t: np.ndarray       # s since the first localisation
    xy: np.ndarray      # µm
    speed: np.ndarray   # mm/s
    grad: np.ndarray

    def __len__(self):
        return len(self.t)


def segment_accel(p1, v1, p2, dt_frame: float) -> np.ndarray:
    """Constant acceleration carrying ``p1`` with velocity ``v1`` onto ``p2`` after ``dt_frame``.

    Positions in µm, ``v1`` in mm/s, ``dt_frame`` in s; returns mm/s².
    """
    if not dt_frame > 0:
        raise ValueError("dt_frame must be positive")
    p1, v1, p2 = (np.asarray(x, dtype=float) for x in (p1, v1, p2))
    return accel_from_internal(2.0 * (p2 - p1 - speed_to_internal(v1) * dt_frame) / dt_frame ** 2)


def interpolate(xy, dt: float, method: Method | str = Method.accel, step_len: float = 5.0,
                velocities=None, track_id: int = 0,
                sampling: Sampling | str = Sampling.segment) -> DenseTrack:
    """Sample a trajectory so consecutive samples are at most ``step_len`` µm apart.

    ``linear`` joins localisations with straight segments. ``accel`` starts
    each segment with the filtered velocity at its first point and the
    constant acceleration that lands exactly on the next localisation.
    Every localisation is reproduced exactly.

    ``sampling="track"`` gives all segments the sub-step count of the fastest
    one, so samples are uniform in time. Averaged speed gradients need this:
    per-segment counts oversample segments that speed up and bias the mean.
    """
    method = Method(method)
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        raise DataError("interpolation needs at least two points")
    if method is Method.accel:
        if velocities is None:
            raise DataError("accel interpolation needs per-point velocities")
        velocities = np.asarray(velocities, dtype=float).reshape(-1, 2)  # µm/s

    segs = []
    for k in range(len(xy) - 1):
        p1, p2 = xy[k], xy[k + 1]
        if method is Method.linear:
            v, a = (p2 - p1) / dt, np.zeros(2)
        else:
            v = velocities[k]
            a = accel_to_internal(segment_accel(p1, speed_from_internal(v), p2, dt))
        segs.append((p1, v, a))
    # |v + a tau| is convex in tau, so a segment's top speed sits at an end point
    n_seg = [max(1, math.ceil(max(math.hypot(*v), math.hypot(*(v + a * dt))) * dt / step_len - 1e-9))
             for _, v, a in segs]
    if Sampling(sampling) is Sampling.track:
        n_seg = [max(n_seg)] * len(segs)
    ts, pos, spd = [], [], []
    for k, ((p1, v, a), n_sub) in enumerate(zip(segs, n_seg)):
        tau = dt * np.arange(n_sub) / n_sub
        pos.append(p1 + tau[:, None] * v + 0.5 * tau[:, None] ** 2 * a)
        spd.append(np.hypot(*(v + tau[:, None] * a).T))
        ts.append(k * dt + tau)
    pos.append(xy[-1:])
    spd.append([math.hypot(*(v + a * dt))])
    ts.append([(len(xy) - 1) * dt])
    t = np.concatenate(ts)
    return DenseTrack(track_id, t, np.concatenate(pos), speed_from_internal(np.concatenate(spd)),
                      np.zeros(len(t)))


def interpolate_track(rec: TrackRecord, dt: float, method: Method | str = Method.accel,
                      step_len: float = 5.0, sampling: Sampling | str = Sampling.segment) -> DenseTrack:
    return interpolate(rec.xy, dt, method, step_len, velocities=rec.v, track_id=rec.track_id,
                       sampling=sampling)


def speed_gradient(dense: DenseTrack, per: GradientPer | str = GradientPer.time) -> DenseTrack:
    """Fill ``grad`` with the forward difference of speed between samples."""
    per = GradientPer(per)
    n = len(dense)
    grad = np.zeros(n)
    if n >= 2:
        ds = np.diff(dense.speed)
        if per is GradientPer.time:
            step = np.diff(dense.t)
        else:
            step = np.hypot(*np.diff(dense.xy, axis=0).T) / 1000.0  # µm -> mm
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(step > 0, ds / np.where(step > 0, step, 1.0), 0.0)
        grad[:-1] = g
        grad[-1] = g[-1]
    return DenseTrack(dense.track_id, dense.t, dense.xy, dense.speed, grad)


DENSE_COLUMNS = ["track_id", "x_um", "y_um", "speed_mm_s", "grad"]


def write_dense(tracks, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DENSE_COLUMNS)
        for d in tracks:
            for (x, y), s, g in zip(d.xy, d.speed, d.grad):
                w.writerow([d.track_id, repr(float(x)), repr(float(y)), repr(float(s)), repr(float(g))])


def read_dense(path) -> list[DenseTrack]:
    """Read dense samples back; sample times are not stored and come back as indices."""
    rows: dict[int, list] = {}
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != DENSE_COLUMNS:
            raise DataError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(r, start=2):
            try:
                rows.setdefault(int(row[0]), []).append([float(v) for v in row[1:]])
            except (ValueError, IndexError):
                raise DataError(f"{path}: line {lineno}: malformed row") from None
    out = []
    for tid, vals in rows.items():
        a = np.array(vals)
        out.append(DenseTrack(tid, np.arange(len(a), dtype=float), a[:, :2], a[:, 2], a[:, 3]))
    return out
