"""Experiment drivers shared by the command line, scripts and acceptance tests."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import (ConfigError, DataError, FrameSeq, LinkSet, TrackerConfig, write_links, write_localizations,
                   write_tracks)
from .interp import GradientPer, Method, Sampling, interpolate_track, speed_gradient
from .kalman import Motion
from .metrics import interp_error, score_links
from .render import Channel, MapFormat, render, write_gradient_pgms, write_map
from .simulate import CONCENTRATIONS, PRESETS, FlowSpec, SimConfig, simulate, single_vessel
from .tracker import track

MODES = {"proposed": Motion.accel, "baseline": Motion.const_vel}


@dataclass(frozen=True)
class SweepSpec:
    frame_rates: tuple[float, ...] = (15.0, 25.0, 35.0)
    accelerations: tuple[float, ...] = (0.0, 37.5, 75.0, 112.5)
    concentrations: tuple[str, ...] = ("low", "mid", "high")
    seeds: tuple[int, ...] = (0,)
    modes: tuple[str, ...] = ("proposed", "baseline")
    duration: float = 30.0
    loc_noise_std: float = 2.0
    preset: str = "branching"
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    def __post_init__(self):
        for name in ("frame_rates", "accelerations", "concentrations", "seeds", "modes"):
            val = tuple(getattr(self, name))
            if not val:
                raise ConfigError(f"sweep {name} must be non-empty")
            object.__setattr__(self, name, val)
        for c in self.concentrations:
            if c not in CONCENTRATIONS:
                raise ConfigError(f"unknown concentration {c!r}; choose from {sorted(CONCENTRATIONS)}")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r}; choose from {sorted(MODES)}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")

    def cells(self) -> list[dict]:
        return [dict(frame_rate=fr, a_peak=a, concentration=c, seed=s)
                for fr, a, c, s in itertools.product(self.frame_rates, self.accelerations,
                                                    self.concentrations, self.seeds)]


def cell_name(cell: dict) -> str:
    return f"fr{cell['frame_rate']:g}_a{cell['a_peak']:g}_{cell['concentration']}_s{cell['seed']}"


def run_cell(frame_rate: float, a_peak: float, concentration: str, seed: int,
             cfg: TrackerConfig | None = None, modes=("proposed", "baseline"),
             duration: float = 30.0, loc_noise_std: float = 2.0, preset: str = "branching",
             out_dir=None, maps: bool = False) -> list[dict]:
    """Simulate one dataset, track it in every mode and score each run.

    With ``out_dir`` the dataset, links, tracks and (if ``maps``) the
    accel-interpolated maps of every mode are written there.
    """
    cfg = cfg or TrackerConfig()
    sim = simulate(PRESETS[preset](seed), FlowSpec(a_peak=a_peak),
                   SimConfig(frame_rate, duration, CONCENTRATIONS[concentration], loc_noise_std, seed))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_localizations(sim.seq, out / "localizations.csv")
        write_links(sim.gt, out / "gt_links.csv")
    rows = []
    for mode in modes:
        tracks, links = track(sim.seq, cfg, MODES[mode])
        score = score_links(links, sim.gt, sim.seq)
        rows.append(dict(preset=preset, frame_rate=frame_rate, a_peak=a_peak, concentration=concentration,
                         seed=seed, mode=mode, n_frames=sim.seq.n_frames,
                         n_localizations=sim.seq.n_localizations, n_gt_links=len(sim.gt),
                         n_tracks=len(tracks), **score.as_row()))
        if out is not None:
            write_links(links, out / f"links_{mode}.csv")
            write_tracks(tracks, out / f"tracks_{mode}.csv", frame_rate)
            if maps and tracks:
                write_maps(tracks, sim.seq.dt, out / f"map_{mode}")
    return rows


def dense_tracks(tracks, dt: float, method: Method | str = Method.accel, step_len: float = 5.0,
                 per: GradientPer | str = GradientPer.time):
    """Time-uniform densified tracks with gradients, as used for maps."""
    return [speed_gradient(interpolate_track(t.record() if hasattr(t, "record") else t, dt, method, step_len,
                                             Sampling.track), per)
            for t in tracks]


def write_maps(tracks, dt: float, prefix, method: Method | str = Method.accel, pixel: float = 5.0) -> dict:
    maps = render(dense_tracks(tracks, dt, method, pixel), pixel)
    prefix = Path(prefix)
    for ch, m in maps.items():
        write_map(m, f"{prefix}_{ch.value}.pgm", MapFormat.pgm16)
        write_map(m, f"{prefix}_{ch.value}.csv", MapFormat.csv)
    write_gradient_pgms(maps[Channel.speed_gradient], f"{prefix}_{Channel.speed_gradient.value}")
    return maps


# --------------------------------------------------------- interpolation suite

def interp_suite(a_peak: float = 37.5, frame_rate: float = 25.0, duration: float = 30.0,
                 loc_noise_std: float = 2.0, seed: int = 0, step_len: float = 5.0,
                 cfg: TrackerConfig | None = None) -> list[dict]:
    """Interpolation error of both methods on the six single-vessel presets.

    One bubble per vessel, tracked in the proposed mode. Error is the
    distance from each interpolated sample to the true centerline.
    """
    cfg = cfg or TrackerConfig()
    rows = []
    for i in range(6):
        sim = simulate(single_vessel(i), FlowSpec(a_peak=a_peak),
                       SimConfig(frame_rate, duration, 1, loc_noise_std, seed + i))
        tracks, _ = track(sim.seq, cfg, Motion.accel)
        row = dict(dataset=f"single{i}", seed=seed + i, n_tracks=len(tracks),
                   n_points=sum(len(t) for t in tracks))
        for method in Method:
            xy = np.concatenate([interpolate_track(t.record(), sim.seq.dt, method, step_len).xy for t in tracks])
            mean, std, mx = interp_error(xy, sim.centerline)
            row.update({f"{method.value}_mean": mean, f"{method.value}_std": std, f"{method.value}_max": mx})
        rows.append(row)
    return rows


# ------------------------------------------------------------- downsampling

def downsample(seq: FrameSeq, k: int) -> list[FrameSeq]:
    """Split into ``k`` subgroups taking every ``k``-th frame, each at ``frame_rate / k``."""
    if k < 2:
        raise ConfigError("downsampling factor must be >= 2")
    if k >= seq.n_frames:
        raise DataError(f"factor {k} leaves a subgroup without frames ({seq.n_frames} frames)")
    return [seq.subsample(j, k) for j in range(k)]


def tag_links(subgroup_links: list[LinkSet]) -> frozenset:
    """Union of per-subgroup links, each tagged ``(subgroup, frame, a, b)``."""
    return frozenset((j, *l) for j, ls in enumerate(subgroup_links) for l in ls.links)


def composite_links(tracks, k: int) -> frozenset:
    """Pairs ``k`` frames apart on one high-rate track, in subgroup coordinates.

    A detection at original frame ``f`` sits at frame ``f // k`` of subgroup
    ``f % k`` with its index unchanged.
    """
    out = set()
    for t in tracks:
        det = t.det_idx
        for i in range(len(det) - k):
            f = t.start_frame + i
            out.add((f % k, f // k, int(det[i]), int(det[i + k])))
    return frozenset(out)


def downsample_consistency(seed: int, k: int = 4, frame_rate: float = 100.0, a_peak: float = 75.0,
                           concentration: str = "mid", duration: float = 30.0,
                           loc_noise_std: float = 2.0, cfg: TrackerConfig | None = None) -> list[dict]:
    """Fraction of each mode's own high-rate links that survive tracking at ``frame_rate / k``."""
    cfg = cfg or TrackerConfig()
    sim = simulate(PRESETS["branching"](seed), FlowSpec(a_peak=a_peak),
                   SimConfig(frame_rate, duration, CONCENTRATIONS[concentration], loc_noise_std, seed))
    groups = downsample(sim.seq, k)
    rows = []
    for mode, motion in MODES.items():
        ref_tracks, _ = track(sim.seq, cfg, motion)
        ref = composite_links(ref_tracks, k)
        low = tag_links([track(g, cfg, motion)[1] for g in groups])
        kept = len(ref & low)
        rows.append(dict(seed=seed, mode=mode, reference=len(ref), retained=kept,
                         fraction=kept / len(ref) if ref else float("nan")))
    return rows


# ------------------------------------------------------------ render checks

def gradient_null_check(seed: int = 0, frame_rate: float = 25.0, duration: float = 30.0,
                        concentration: str = "mid", loc_noise_std: float = 2.0,
                        cfg: TrackerConfig | None = None) -> dict:
    """Map-mean speed gradient on zero-acceleration data and its sampling-noise floor.

    The map mean is count-weighted (total gradient sum over total count).
    The floor is the standard error of per-track mean gradients, since
    samples within one track are strongly correlated.
    """
    cfg = cfg or TrackerConfig()
    sim = simulate(PRESETS["branching"](seed), FlowSpec(a_peak=0.0),
                   SimConfig(frame_rate, duration, CONCENTRATIONS[concentration], loc_noise_std, seed))
    tracks, _ = track(sim.seq, cfg, Motion.accel)
    dense = dense_tracks(tracks, sim.seq.dt)
    maps = render(dense)
    g = maps[Channel.speed_gradient]
    per_track = np.array([d.grad.mean() for d in dense])
    floor = float(per_track.std(ddof=1) / np.sqrt(len(per_track)))
    n_samples = sum(len(d) for d in dense)
    return dict(seed=seed, map_mean=float(g.sums.sum() / g.counts.sum()), noise_floor=floor,
                density_sum=int(maps[Channel.density].counts.sum()), n_samples=n_samples,
                dropped=maps[Channel.density].dropped, n_tracks=len(tracks))


def spec_echo(spec: SweepSpec) -> dict:
    d = asdict(spec)
    d["tracker"] = {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(spec.tracker).items()}
    return d
