import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from acctrack.core import ConfigError
from acctrack.simulate import (CENTERLINE_STEP, CONCENTRATIONS, PRESETS, FlowSpec, Network, SimConfig,
                               VesselSpec, branching_phantom, simulate, single_vessel, speed_derivative,
                               speed_waveform, straight_vessel)


def test_waveform_constant_without_acceleration():
    t = np.linspace(0, 5, 101)
    np.testing.assert_array_equal(speed_waveform(t, FlowSpec(a_peak=0.0)), 3.0)


def test_waveform_amplitude_gives_peak_derivative():
    flow = FlowSpec(s0=30.0, a_peak=37.5, heart_rate=75.0)
    assert flow.freq == 1.25
    assert flow.amplitude == pytest.approx(4.7746, abs=1e-4)
    t = np.linspace(0, 2, 200001)
    ds = np.gradient(speed_waveform(t, flow), t)
    assert np.abs(ds).max() == pytest.approx(37.5, rel=1e-6)


def test_waveform_clamped_at_floor():
    flow = FlowSpec(s0=3.0, a_peak=500.0, s_min=0.1)
    s = speed_waveform(np.linspace(0, 3, 3001), flow)
    assert s.min() == 0.1
    assert speed_derivative(0.6, flow) == 0.0  # inside the clamped trough


def test_invalid_specs():
    with pytest.raises(ConfigError):
        FlowSpec(s0=0.0)
    with pytest.raises(ConfigError):
        FlowSpec(a_peak=-1.0)
    with pytest.raises(ConfigError):
        SimConfig(frame_rate=0.0)
    with pytest.raises(ConfigError):
        VesselSpec([[0, 0], [0, 0]])


def test_uniform_spacing_on_straight_vessel():
    sim = simulate(straight_vessel(), FlowSpec(a_peak=0.0), SimConfig(25.0, 3.0, 1, 0.0, seed=0))
    steps = sim.gt.lengths(sim.seq)
    assert len(steps) > 10
    np.testing.assert_allclose(steps, 120.0, rtol=1e-9)


def test_along_track_acceleration_matches_waveform():
    flow = FlowSpec(a_peak=37.5)
    sim = simulate(straight_vessel(30000.0), flow, SimConfig(1000.0, 2.0, 1, 0.0, seed=4))
    b = sim.bubbles[0]
    fr = np.arange(sim.seq.n_frames)
    x = np.array([sim.truth_xy[f][0, 0] for f in fr])
    t = fr / 1000.0
    acc = np.diff(x, 2) / 1e-3 ** 2 / 1000.0  # mm/s²
    truth = speed_derivative(t[1:-1] + b.phase, flow)
    raw = flow.s0 + flow.amplitude * np.sin(2 * math.pi * flow.freq * (t[1:-1] + b.phase))
    ok = raw > flow.s_min + 0.2  # away from the clamp corners
    assert ok.sum() > 500
    np.testing.assert_allclose(acc[ok], truth[ok], atol=0.02 * flow.a_peak)


def test_deterministic_for_seed():
    args = (branching_phantom(1), FlowSpec(a_peak=75.0), SimConfig(25.0, 4.0, 15, 2.0, seed=9))
    a, b = simulate(*args), simulate(*args)
    for fa, fb, ia, ib in zip(a.seq.xy, b.seq.xy, a.seq.gt_id, b.seq.gt_id):
        np.testing.assert_array_equal(fa, fb)
        np.testing.assert_array_equal(ia, ib)
    assert a.gt == b.gt
    c = simulate(args[0], args[1], SimConfig(25.0, 4.0, 15, 2.0, seed=10))
    assert any(not np.array_equal(x, y) for x, y in zip(a.seq.xy, c.seq.xy))


@pytest.fixture(scope="module")
def branching_sim():
    return simulate(branching_phantom(0), FlowSpec(a_peak=112.5), SimConfig(25.0, 10.0, 15, 2.0, seed=5))


def test_truth_on_centerline(branching_sim):
    tree = cKDTree(branching_sim.centerline)
    d, _ = tree.query(np.concatenate(branching_sim.truth_xy))
    assert d.max() < 0.2


def test_displacement_bound(branching_sim):
    sim = branching_sim
    flow = FlowSpec(a_peak=112.5)
    bound = 1000.0 * flow.s_max / sim.seq.frame_rate + 4 * 2.0
    assert sim.gt.lengths(sim.seq).max() <= bound


def test_gt_links_follow_identity(branching_sim):
    seq, gt = branching_sim.seq, branching_sim.gt
    for l in gt:
        assert seq.gt_id[l.frame][l.a] == seq.gt_id[l.frame + 1][l.b]
    n_pairs = sum(len(set(seq.gt_id[k]) & set(seq.gt_id[k + 1])) for k in range(seq.n_frames - 1))
    assert len(gt) == n_pairs


def test_counts_match_config():
    sim = simulate(branching_phantom(0), FlowSpec(), SimConfig(25.0, 30.0, 15, 2.0, seed=0))
    assert sim.seq.n_frames == 750
    per_frame = [len(f) for f in sim.seq.xy]
    assert abs(np.mean(per_frame) - 15) < 1.0
    assert CONCENTRATIONS == {"low": 10, "mid": 15, "high": 25}


def test_centerline_resampling_uniform():
    net = Network(branching_phantom(0) + single_vessel(5))
    for seg in net.segments:
        step = np.hypot(*np.diff(seg.points, axis=0).T)
        np.testing.assert_allclose(step, CENTERLINE_STEP, atol=0.01)
        assert abs(step.sum() - seg.length) < 1e-6


def test_branches_continue_parent_tangent():
    net = Network(branching_phantom(2))
    assert len(net.roots) == 2
    for r in net.roots:
        parent = net.segments[r]
        assert len(parent.children) == 3
        t_parent = parent.points[-1] - parent.points[-2]
        for c in parent.children:
            child = net.segments[c]
            np.testing.assert_allclose(child.points[0], parent.points[-1], atol=1e-9)
            t_child = child.points[1] - child.points[0]
            cos = t_parent @ t_child / np.hypot(*t_parent) / np.hypot(*t_child)
            assert cos > 0.9999


def test_presets_build():
    assert {"branching", "straight", *(f"single{i}" for i in range(6))} <= set(PRESETS)
    for name, make in PRESETS.items():
        Network(make(0))
