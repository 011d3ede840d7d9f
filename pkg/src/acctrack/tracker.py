"""Frame-by-frame Kalman tracking with 3-frame track initialisation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .assign import CostMatrix, solve_bipartite, solve_triplets
from .core import (FrameSeq, InitMode, Link, LinkSet, LinkSource, Localization, TrackerConfig,
                   TrackRecord, speed_to_internal)
from .kalman import (KalmanState, Motion, MotionModel, clamp_cost, cost_at_mahalanobis,
                     initial_covariance, log_likelihood_matrix, model_from_config, predict_many,
                     update_many)

log = logging.getLogger(__name__)

# innovations beyond this Mahalanobis distance lose to non-assignment
NULL_MAHALANOBIS = 3.0


class TrackStatus(str, Enum):
    active = "active"
    terminated = "terminated"


@dataclass(frozen=True)
class TrackerMode:
    motion: Motion = Motion.accel

    @classmethod
    def proposed(cls):
        return cls(Motion.accel)

    @classmethod
    def baseline(cls):
        return cls(Motion.const_vel)


@dataclass
class KalmanTrack:
    id: int
    start_frame: int
    states: list[KalmanState] = field(default_factory=list)
    points: list[Localization] = field(default_factory=list)
    det_idx: list[int] = field(default_factory=list)
    status: TrackStatus = TrackStatus.active

    def __len__(self):
        return len(self.points)

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self.points) - 1

    def links(self) -> list[Link]:
        f0 = self.start_frame
        return [Link(f0 + t, self.det_idx[t], self.det_idx[t + 1]) for t in range(len(self.det_idx) - 1)]

    def record(self) -> TrackRecord:
        """Positions plus filtered velocity/acceleration per point (internal units)."""
        n = len(self.points)
        xy = np.array([(p.x, p.y) for p in self.points]).reshape(n, 2)
        S = np.array([st.s for st in self.states])
        half = S.shape[1] // 2
        v = S[:, [1, half + 1]]
        a = S[:, [2, 5]] if half == 3 else np.zeros((n, 2))
        return TrackRecord(self.id, np.arange(self.start_frame, self.start_frame + n), xy, v, a)


def init_kinematics(p1, p2, p3, dt: float, mode: InitMode = InitMode.kinematic):
    """Velocity and acceleration estimates from three consecutive positions.

    The velocity is the central difference ``(L12 + L23) / 2dt``, an estimate
    at the middle frame. ``paper_literal`` divides the displacement change by
    ``2dt`` as printed; ``kinematic`` uses the second difference ``/ dt²``.
    """
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    l12, l23 = p2 - p1, p3 - p2
    v = (l12 + l23) / (2.0 * dt)
    if InitMode(mode) is InitMode.paper_literal:
        a = (l23 - l12) / (2.0 * dt)
    else:
        a = (l23 - l12) / dt ** 2
    return v, a


def _init_block_states(p1, p2, p3, dt, mode, model: MotionModel, v_max_int: float) -> list[KalmanState]:
    """States for the three initialising points; the last one seeds the filter."""
    v, a = init_kinematics(p1, p2, p3, dt, mode)
    P0 = initial_covariance(model, v_max_int)
    pts = [np.asarray(p, dtype=float) for p in (p1, p2, p3)]
    accel = model.motion is Motion.accel
    states = []
    for t, p in zip((-1, 0, 1), pts):
        if accel:
            # in kinematic mode carry the mid-frame velocity to each point
            vt = v + t * a * dt if InitMode(mode) is InitMode.kinematic else v
            s = np.array([p[0], vt[0], a[0], p[1], vt[1], a[1]])
        else:
            s = np.array([p[0], v[0], p[1], v[1]])
        states.append(KalmanState(s, P0.copy()))
    return states


def init_state(p1, p2, p3, dt: float, mode: InitMode = InitMode.kinematic,
               cfg: TrackerConfig | None = None, motion: Motion = Motion.accel) -> KalmanState:
    """Filter state at the third frame of an accepted triplet."""
    cfg = cfg or TrackerConfig()
    model = model_from_config(cfg, dt, motion)
    return _init_block_states(p1, p2, p3, dt, mode, model, speed_to_internal(cfg.v_max))[-1]


def _pair_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def track(seq: FrameSeq, cfg: TrackerConfig | None = None,
          mode: TrackerMode | Motion | str = Motion.accel) -> tuple[list[KalmanTrack], LinkSet]:
    """Track all localisations in ``seq``.

    Per frame: predict live tracks, pair them to detections by minimum total
    inverse-likelihood cost, update matched tracks and terminate the rest,
    then start new tracks from smooth triplets of detections left unpaired in
    the three most recent frames.
    """
    cfg = cfg or TrackerConfig()
    motion = mode.motion if isinstance(mode, TrackerMode) else Motion(mode)
    if seq.n_frames < 1:
        raise ValueError("sequence has no frames")
    dt = seq.dt
    model = model_from_config(cfg, dt, motion)
    gate = cfg.gate(dt)
    v_max_int = speed_to_internal(cfg.v_max)
    ix, iy = model.pos_idx

    finished: list[KalmanTrack] = []
    active: list[KalmanTrack] = []
    S = np.zeros((0, model.dim))
    P = np.zeros((0, model.dim, model.dim))
    last_xy = np.zeros((0, 2))
    free: dict[int, list[int]] = {}
    next_id = 0

    for k in range(seq.n_frames):
        Z = seq.xy[k]
        ids = seq.gt_id[k] if seq.gt_id is not None else None
        unmatched_det = np.ones(len(Z), dtype=bool)

        if active:
            Sp, Pp = predict_many(S, P, model)
            keep = np.zeros(len(active), dtype=bool)
            if len(Z):
                loglik, logdet = log_likelihood_matrix(Sp, Pp, model, Z)
                cost = clamp_cost(np.exp(np.minimum(-loglik, 700.0)))
                cost[_pair_dist(last_xy, Z) > gate] = np.inf
                m = CostMatrix(cost, row_null=cost_at_mahalanobis(logdet, NULL_MAHALANOBIS),
                               col_null=np.zeros(len(Z)))
                pairs = solve_bipartite(m)
                if pairs:
                    r = np.array([p[0] for p in pairs])
                    c = np.array([p[1] for p in pairs])
                    Su, Pu = update_many(Sp[r], Pp[r], model, Z[c])
                    S_next, P_next = Sp.copy(), Pp.copy()
                    S_next[r], P_next[r] = Su, Pu
                    for rr, cc in pairs:
                        t = active[rr]
                        t.states.append(KalmanState(S_next[rr], P_next[rr]))
                        t.points.append(_loc(k, Z, ids, cc))
                        t.det_idx.append(cc)
                    keep[r] = True
                    unmatched_det[c] = False
                    S, P = S_next, P_next
            for t, kp in zip(active, keep):
                if not kp:
                    t.status = TrackStatus.terminated
                    finished.append(t)
            active = [t for t, kp in zip(active, keep) if kp]
            S, P = S[keep], P[keep]
            last_xy = Z[[t.det_idx[-1] for t in active]].reshape(-1, 2)

        free[k] = list(np.flatnonzero(unmatched_det))
        free.pop(k - 3, None)
        if k < 2:
            continue
        f1, f2, f3 = free[k - 2], free[k - 1], free[k]
        if not (f1 and f2 and f3):
            continue
        triplets = solve_triplets(seq.xy[k - 2][f1], seq.xy[k - 1][f2], Z[f3], cfg, dt)
        if not triplets:
            continue
        new_S, new_P, new_xy = [], [], []
        for tr in triplets:
            i, j, l = f1[tr.i], f2[tr.j], f3[tr.k]
            p1, p2, p3 = seq.xy[k - 2][i], seq.xy[k - 1][j], Z[l]
            states = _init_block_states(p1, p2, p3, dt, cfg.a_init_mode, model, v_max_int)
            trk = KalmanTrack(next_id, k - 2, states,
                              [_loc(k - 2, seq.xy[k - 2], _ids(seq, k - 2), i),
                               _loc(k - 1, seq.xy[k - 1], _ids(seq, k - 1), j),
                               _loc(k, Z, ids, l)],
                              [int(i), int(j), int(l)])
            next_id += 1
            active.append(trk)
            new_S.append(states[-1].s)
            new_P.append(states[-1].P)
            new_xy.append(p3)
        used = {(0, f1[t.i]) for t in triplets} | {(1, f2[t.j]) for t in triplets} | {(2, f3[t.k]) for t in triplets}
        free[k - 2] = [d for d in f1 if (0, d) not in used]
        free[k - 1] = [d for d in f2 if (1, d) not in used]
        free[k] = [d for d in f3 if (2, d) not in used]
        S = np.vstack([S, np.array(new_S)])
        P = np.concatenate([P, np.array(new_P)])
        last_xy = np.vstack([last_xy, np.array(new_xy)])

    for t in active:
        t.status = TrackStatus.terminated
    tracks = sorted(finished + active, key=lambda t: t.id)
    kept = [t for t in tracks if len(t) >= cfg.min_track_len]
    links = LinkSet((l for t in kept for l in t.links()), LinkSource.tracker)
    log.debug("tracked %d frames: %d tracks, %d links", seq.n_frames, len(kept), len(links))
    return kept, links


def _ids(seq: FrameSeq, k: int):
    return seq.gt_id[k] if seq.gt_id is not None else None


def _loc(k: int, Z: np.ndarray, ids, i: int) -> Localization:
    return Localization(k, float(Z[i, 0]), float(Z[i, 1]), None if ids is None else int(ids[i]))
