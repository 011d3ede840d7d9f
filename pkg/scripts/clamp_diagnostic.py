"""Mode ordering at one acceleration with and without a clamped speed waveform.

With the default s0 = 3 mm/s the sinusoid amplitude exceeds s0 for every
nonzero acceleration, so speed sits at the floor for part of each cycle and
the acceleration jumps at the clamp corners. Raising s0 above the amplitude
removes the clamp; the gate is widened to keep the faster bubbles in range.
"""
from __future__ import annotations

from dataclasses import dataclass

from _common import parse_config, save

from acctrack.core import TrackerConfig
from acctrack.experiments import MODES
from acctrack.metrics import score_links
from acctrack.simulate import PRESETS, FlowSpec, SimConfig, simulate
from acctrack.tracker import track


@dataclass(frozen=True)
class Config:
    a_peak: float = 112.5
    frame_rate: float = 25.0
    n_seeds: int = 10
    unclamped_s0: float = 15.0
    unclamped_v_max: float = 40.0
    out: str = "results/clamp"


def main():
    cfg = parse_config(Config, __doc__.splitlines()[0])
    rows = []
    for label, s0, v_max in (("clamped", 3.0, TrackerConfig().v_max),
                             ("unclamped", cfg.unclamped_s0, cfg.unclamped_v_max)):
        flow = FlowSpec(s0=s0, a_peak=cfg.a_peak)
        wins = 0
        for seed in range(cfg.n_seeds):
            sim = simulate(PRESETS["branching"](seed), flow, SimConfig(cfg.frame_rate, 30.0, 15, 2.0, seed))
            tcfg = TrackerConfig(v_max=v_max)
            sc = {m: score_links(track(sim.seq, tcfg, motion)[1], sim.gt, sim.seq) for m, motion in MODES.items()}
            p, b = sc["proposed"], sc["baseline"]
            wins += p.tpr > b.tpr and p.fnr < b.fnr and p.cpf > b.cpf
            for mode, s in sc.items():
                rows.append(dict(waveform=label, s0=s0, seed=seed, mode=mode, **s.as_row()))
        print(f"{label} (s0={s0:g}, amplitude={flow.amplitude:.2f} mm/s): proposed better on all three metrics "
              f"in {wins}/{cfg.n_seeds} seeds")
    save(rows, cfg.out, "clamp_diagnostic.csv")


if __name__ == "__main__":
    main()
