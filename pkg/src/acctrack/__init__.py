"""Constant-acceleration Kalman tracking of point targets, with a pulsatile-flow simulator."""

__version__ = "0.1.0"

from .assign import CostMatrix, Triplet, solve_bipartite, solve_triplets, triplet_cost
from .core import (ConfigError, DataError, FrameSeq, InitMode, Link, LinkSet, LinkSource, Localization,
                   TrackerConfig, TrackRecord, read_links, read_localizations, read_tracks, write_links,
                   write_localizations, write_tracks)
from .interp import DenseTrack, Method, interpolate, interpolate_track, segment_accel, speed_gradient
from .kalman import (DegenerateCovarianceError, KalmanState, Motion, MotionModel, make_model, pair_cost,
                     predict, update)
from .metrics import TrackScore, interp_error, score_links, summarize
from .render import Channel, FieldMap, accumulate, render, write_map
from .simulate import FlowSpec, SimConfig, VesselSpec, simulate, speed_waveform
from .tracker import KalmanTrack, TrackerMode, init_state, track

__all__ = [name for name in dir() if not name.startswith("_")]
