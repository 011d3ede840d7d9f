"""Linear vs acceleration-based interpolation error on the six single-vessel datasets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _common import parse_config, save

from acctrack.experiments import interp_suite


@dataclass(frozen=True)
class Config:
    a_peak: float = 37.5
    frame_rate: float = 25.0
    duration: float = 30.0
    loc_noise_std: float = 2.0
    step_len: float = 5.0
    seed: int = 0
    out: str = "results/interp"


def main():
    cfg = parse_config(Config, __doc__)
    rows = interp_suite(cfg.a_peak, cfg.frame_rate, cfg.duration, cfg.loc_noise_std, cfg.seed, cfg.step_len)
    for r in rows:
        print(f"{r['dataset']}: linear {r['linear_mean']:.2f}+-{r['linear_std']:.2f} um, "
              f"accel {r['accel_mean']:.2f}+-{r['accel_std']:.2f} um")
    lin = np.mean([r["linear_mean"] for r in rows])
    acc = np.mean([r["accel_mean"] for r in rows])
    print(f"overall: linear {lin:.2f} um, accel {acc:.2f} um, reduction {100 * (1 - acc / lin):.1f}%")
    save(rows, cfg.out, "interp_error.csv")


if __name__ == "__main__":
    main()
