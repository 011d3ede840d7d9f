"""Fraction of 100 Hz links each mode keeps when the data is tracked as k subgroups at 100/k Hz."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _common import parse_config, save

from acctrack.experiments import downsample_consistency


@dataclass(frozen=True)
class Config:
    n_seeds: int = 5
    factor: int = 4
    frame_rate: float = 100.0
    a_peak: float = 75.0
    concentration: str = "mid"
    out: str = "results/downsample"


def main():
    cfg = parse_config(Config, __doc__)
    rows = []
    for seed in range(cfg.n_seeds):
        rs = downsample_consistency(seed, cfg.factor, cfg.frame_rate, cfg.a_peak, cfg.concentration)
        rows += rs
        print("seed", seed, ", ".join(f"{r['mode']} {r['retained']}/{r['reference']} = {r['fraction']:.4f}"
                                      for r in rs))
    for mode in ("proposed", "baseline"):
        print(f"{mode}: mean retained fraction {np.mean([r['fraction'] for r in rows if r['mode'] == mode]):.4f}")
    save(rows, cfg.out, "downsample.csv")


if __name__ == "__main__":
    main()
