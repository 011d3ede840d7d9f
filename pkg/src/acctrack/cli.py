"""``acctrack`` command line: simulate, track, downsample, render, evaluate, sweep.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import (ConfigError, DataError, TrackerConfig, load_config, read_links, read_localizations,
                   read_tracks, write_links, write_localizations, write_tracks)
from .experiments import SweepSpec, cell_name, downsample, run_cell
from .interp import GradientPer, Method, Sampling, interpolate_track, read_dense, speed_gradient, write_dense
from .kalman import Motion
from .metrics import interp_error, score_links, summarize, write_rows
from .render import Channel, MapFormat, render, write_gradient_pgms, write_map
from .simulate import CONCENTRATIONS, PRESETS, FlowSpec, SimConfig, simulate
from .tracker import track

log = logging.getLogger("acctrack")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
MODE_FLAGS = {"accel": Motion.accel, "const-vel": Motion.const_vel}

SIM_KEYS = {"preset", "frame_rate", "duration", "n_concurrent", "concentration", "loc_noise_std",
            "s0", "a_peak", "heart_rate", "s_min"}
SWEEP_KEYS = {"frame_rates", "accelerations", "concentrations", "n_seeds", "duration",
              "loc_noise_std", "preset", "maps"}
RENDER_KEYS = {"pixel", "method", "step_len", "gradient_per"}


# ------------------------------------------------------------------ config

def _section(conf: dict, name: str, allowed: set[str]) -> dict:
    sec = conf.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")
    return sec


def _load(path) -> dict:
    if path is None:
        return {}
    try:
        return load_config(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def tracker_config(conf: dict) -> TrackerConfig:
    sec = _section(conf, "tracker", {f.name for f in fields(TrackerConfig)})
    try:
        return TrackerConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[tracker]: {exc}") from None


def _sim_setup(conf: dict, args) -> tuple[str, FlowSpec, SimConfig]:
    sec = dict(_section(conf, "simulate", SIM_KEYS))
    if args.frame_rate is not None:
        sec["frame_rate"] = args.frame_rate
    preset = sec.pop("preset", "branching")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    conc = sec.pop("concentration", None)
    if conc is not None:
        if conc not in CONCENTRATIONS:
            raise ConfigError(f"unknown concentration {conc!r}")
        sec.setdefault("n_concurrent", CONCENTRATIONS[conc])
    flow = FlowSpec(**{k: sec.pop(k) for k in ("s0", "a_peak", "heart_rate", "s_min") if k in sec})
    cfg = SimConfig(seed=args.seed, **sec)
    return preset, flow, cfg


def sweep_spec(conf: dict, args) -> tuple[SweepSpec, bool]:
    sec = dict(_section(conf, "sweep", SWEEP_KEYS))
    n_seeds = int(sec.pop("n_seeds", 1))
    if n_seeds < 1:
        raise ConfigError("[sweep] n_seeds must be >= 1")
    maps = bool(sec.pop("maps", False)) or args.maps
    if args.frame_rate is not None:
        sec["frame_rates"] = [args.frame_rate]
    seeds = tuple(args.seed + i for i in range(n_seeds))
    try:
        return SweepSpec(seeds=seeds, tracker=tracker_config(conf), **sec), maps
    except TypeError as exc:
        raise ConfigError(f"[sweep]: {exc}") from None


# ---------------------------------------------------------------- commands

def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out}: {exc}") from None
    return out


def cmd_simulate(args) -> int:
    conf = _load(args.config)
    preset, flow, cfg = _sim_setup(conf, args)
    sim = simulate(PRESETS[preset](args.seed), flow, cfg)
    out = _out_dir(args)
    write_localizations(sim.seq, out / "localizations.csv")
    write_links(sim.gt, out / "gt_links.csv")
    with (out / "centerline.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_um", "y_um"])
        w.writerows([repr(float(x)), repr(float(y))] for x, y in sim.centerline)
    log.info("%d frames, %d localisations, %d true links -> %s",
             sim.seq.n_frames, sim.seq.n_localizations, len(sim.gt), out)
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = tracker_config(_load(args.config))
    seq = read_localizations(args.localizations)
    if args.frame_rate is not None:
        seq = replace(seq, frame_rate=args.frame_rate)
    tracks, links = track(seq, cfg, MODE_FLAGS[args.mode])
    out = _out_dir(args)
    write_tracks(tracks, out / "tracks.csv", seq.frame_rate)
    write_links(links, out / "links.csv")
    log.info("%d tracks, %d links -> %s", len(tracks), len(links), out)
    return EXIT_OK


def cmd_downsample(args) -> int:
    seq = read_localizations(args.localizations)
    groups = downsample(seq, args.factor)
    out = _out_dir(args)
    for j, g in enumerate(groups):
        write_localizations(g, out / f"subgroup_{j}.csv")
    return EXIT_OK


def cmd_render(args) -> int:
    conf = _section(_load(args.config), "render", RENDER_KEYS)
    method = Method(args.method or conf.get("method", "accel"))
    pixel = float(args.pixel or conf.get("pixel", 5.0))
    step_len = float(conf.get("step_len", pixel))
    per = GradientPer(conf.get("gradient_per", "time"))
    if not pixel > 0 or not step_len > 0:
        raise ConfigError("pixel and step_len must be positive")
    records, frame_rate = read_tracks(args.tracks)
    frame_rate = args.frame_rate or frame_rate
    if frame_rate is None:
        raise DataError(f"{args.tracks}: no frame rate in header; pass --frame-rate")
    records = [r for r in records if len(r) >= 2]
    if not records:
        raise DataError(f"{args.tracks}: no tracks with two or more points")
    dt = 1.0 / frame_rate
    dense = [speed_gradient(interpolate_track(r, dt, method, step_len, Sampling.track), per) for r in records]
    out = _out_dir(args)
    write_dense(dense, out / "dense.csv")
    maps = render(dense, pixel)
    for ch, m in maps.items():
        write_map(m, out / f"{ch.value}.pgm", MapFormat.pgm16)
        write_map(m, out / f"{ch.value}.csv", MapFormat.csv)
    write_gradient_pgms(maps[Channel.speed_gradient], out / Channel.speed_gradient.value)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    seq = read_localizations(args.localizations)
    score = score_links(read_links(args.links), read_links(args.gt), seq)
    row = score.as_row()
    if args.dense and args.centerline:
        dense = read_dense(args.dense)
        cl = np.loadtxt(args.centerline, delimiter=",", skiprows=1, ndmin=2)
        xy = np.concatenate([d.xy for d in dense])
        row["interp_mean"], row["interp_std"], row["interp_max"] = interp_error(xy, cl)
    if args.out:
        write_rows([row], args.out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return EXIT_OK


def _cell_job(job):
    cell, spec, out_dir, maps = job
    try:
        rows = run_cell(cell["frame_rate"], cell["a_peak"], cell["concentration"], cell["seed"],
                        spec.tracker, spec.modes, spec.duration, spec.loc_noise_std, spec.preset,
                        out_dir, maps)
        return rows, None
    except Exception as exc:  # recorded per cell; the sweep carries on
        return [], f"{type(exc).__name__}: {exc}"


def cmd_sweep(args) -> int:
    spec, maps = sweep_spec(_load(args.config), args)
    out = _out_dir(args)
    cells = spec.cells()
    jobs = [(c, spec, (out / "cells" / cell_name(c)) if (maps or args.keep_data) else None, maps)
            for c in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    rows, failures = [], []
    for cell, (cell_rows, err) in zip(cells, results):
        rows.extend(cell_rows)
        if err is not None:
            failures.append(dict(cell, error=err))
            log.error("cell %s failed: %s", cell_name(cell), err)
    if rows:
        write_rows(rows, out / "scores.csv")
        write_rows(summarize(rows, ["frame_rate", "a_peak", "concentration"], ("tpr", "fnr", "cpf")),
                   out / "summary.csv")
    if failures:
        write_rows(failures, out / "failures.csv")
        return EXIT_INTERNAL
    log.info("%d cells, %d tracker runs -> %s", len(cells), len(rows), out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acctrack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"acctrack {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="TOML file with [tracker]/[simulate]/[sweep]/[render] tables")
        sp.add_argument("--frame-rate", type=float, help="override the frame rate (Hz)")
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("simulate", help="generate a ground-truth dataset")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("track", help="track a localisation CSV")
    common(sp)
    sp.add_argument("localizations")
    sp.add_argument("--mode", choices=sorted(MODE_FLAGS), default="accel")
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("downsample", help="split a localisation CSV into k temporal subgroups")
    sp.add_argument("localizations")
    sp.add_argument("--factor", "-k", type=int, default=4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_downsample)

    sp = sub.add_parser("render", help="densify tracks and write density/speed/gradient maps")
    common(sp)
    sp.add_argument("tracks")
    sp.add_argument("--method", choices=[m.value for m in Method])
    sp.add_argument("--pixel", type=float, help="pixel size in µm")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("evaluate", help="score tracker links against ground truth")
    sp.add_argument("localizations")
    sp.add_argument("--links", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--dense", help="dense.csv from render, for interpolation error")
    sp.add_argument("--centerline", help="centerline.csv from simulate")
    sp.add_argument("--out", help="score CSV (default: stdout)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="run the frame-rate x acceleration x concentration matrix")
    common(sp)
    sp.add_argument("--seed", type=int, required=True, help="first seed; [sweep] n_seeds consecutive seeds")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--maps", action="store_true", help="write per-cell data and maps")
    sp.add_argument("--keep-data", action="store_true", help="write per-cell data without maps")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        if getattr(args, "frame_rate", None) is not None and not args.frame_rate > 0:
            raise ConfigError(f"--frame-rate must be positive, got {args.frame_rate}")
        return args.func(args)
    except ConfigError as exc:
        print(f"acctrack: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"acctrack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        log.debug("internal error", exc_info=True)
        print(f"acctrack: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
