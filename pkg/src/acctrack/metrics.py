"""Link-level tracking scores, interpolation error and sweep summaries."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import DataError, FrameSeq, LinkSet


@dataclass(frozen=True)
class TrackScore:
    tp: int
    fp: int
    fn: int
    d_tp: float
    d_fp: float
    d_fn: float
    tpr: float
    fnr: float
    cpf: float
    # names of ratios whose denominator was zero and were given a sentinel
    undefined: str = ""

    def as_row(self) -> dict:
        return asdict(self)


def _dsum(links, seq: FrameSeq) -> float:
    # correctly rounded sum: independent of link order
    return math.fsum(math.hypot(*(seq.xy[l.frame + 1][l.b] - seq.xy[l.frame][l.a])) for l in links)


def score_links(est: LinkSet, gt: LinkSet, seq: FrameSeq) -> TrackScore:
    """Compare estimated links to ground truth.

    ``tpr = TP/(TP+FP)``, ``fnr = 1 - TP/(TP+FN)`` and
    ``cpf = (d(TP) - d(FP) - d(FN)) / (d(TP) + d(FP) + d(FN))`` where ``d``
    sums link lengths. Empty denominators give 1 for tpr/cpf and 0 for fnr
    when both sets are empty, else the worst value, and are listed in
    ``undefined``.
    """
    est.validate(seq)
    gt.validate(seq)
    tp_set = est.links & gt.links
    fp_set = est.links - gt.links
    fn_set = gt.links - est.links
    tp, fp, fn = len(tp_set), len(fp_set), len(fn_set)
    d_tp, d_fp, d_fn = _dsum(tp_set, seq), _dsum(fp_set, seq), _dsum(fn_set, seq)
    both_empty = not est.links and not gt.links
    undefined = []
    if tp + fp:
        tpr = tp / (tp + fp)
    else:
        tpr = 1.0 if both_empty else 0.0
        undefined.append("tpr")
    if tp + fn:
        fnr = 1.0 - tp / (tp + fn)
    else:
        fnr = 0.0 if both_empty else 1.0
        undefined.append("fnr")
    dsum = d_tp + d_fp + d_fn
    if dsum > 0:
        cpf = (d_tp - d_fp - d_fn) / dsum
    else:
        cpf = 1.0 if both_empty else -1.0
        undefined.append("cpf")
    return TrackScore(tp, fp, fn, d_tp, d_fp, d_fn, tpr, fnr, cpf, ";".join(undefined))


def interp_error(dense_xy, centerline) -> tuple[float, float, float]:
    """Mean, std and max distance (µm) from each sample to its nearest centerline point."""
    dense_xy = np.asarray(getattr(dense_xy, "xy", dense_xy), dtype=float).reshape(-1, 2)
    centerline = np.asarray(centerline, dtype=float).reshape(-1, 2)
    if len(dense_xy) == 0 or len(centerline) == 0:
        raise DataError("interp_error needs non-empty samples and centerline")
    d, _ = cKDTree(centerline).query(dense_xy)
    return float(d.mean()), float(d.std()), float(d.max())


def _std(x: Sequence[float]) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def summarize(rows: Iterable[dict], group_keys: Sequence[str], metrics=("tpr", "fnr", "cpf"),
              pair_key: str = "seed", mode_key: str = "mode",
              proposed: str = "proposed", baseline: str = "baseline") -> list[dict]:
    """Per-group mean/std of each metric and the paired proposed-baseline difference.

    Rows are paired on ``group_keys + pair_key``. A group containing both
    modes must contain exactly the same pairing keys for each.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to summarize")
    groups: dict[tuple, dict[str, dict]] = defaultdict(lambda: defaultdict(dict))
    for r in rows:
        g = tuple(r[k] for k in group_keys)
        key = r.get(pair_key)
        if key in groups[g][r[mode_key]]:
            raise ValueError(f"duplicate row for group {g}, {mode_key}={r[mode_key]}, {pair_key}={key}")
        groups[g][r[mode_key]][key] = r
    out = []
    for g in sorted(groups, key=lambda x: tuple(map(str, x))):
        by_mode = groups[g]
        paired = proposed in by_mode and baseline in by_mode
        if paired and set(by_mode[proposed]) != set(by_mode[baseline]):
            raise ValueError(f"group {g}: proposed and baseline runs do not pair up")
        for metric in metrics:
            row = dict(zip(group_keys, g))
            row["metric"] = metric
            for mode, recs in sorted(by_mode.items()):
                vals = [float(recs[k][metric]) for k in sorted(recs, key=str)]
                row[f"mean_{mode}"] = float(np.mean(vals))
                row[f"std_{mode}"] = _std(vals)
                row["n"] = len(vals)
            if paired:
                keys = sorted(by_mode[proposed], key=str)
                diff = [float(by_mode[proposed][k][metric]) - float(by_mode[baseline][k][metric]) for k in keys]
                row["mean_diff"] = float(np.mean(diff))
                row["std_diff"] = _std(diff)
                base = row[f"mean_{baseline}"]
                row["rel_diff"] = row["mean_diff"] / abs(base) if base else float("nan")
            out.append(row)
    return out


def write_rows(rows: Sequence[dict], path) -> None:
    """CSV with the union of keys as header, in first-seen order."""
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


SCORE_FIELDS = [f.name for f in fields(TrackScore)]
