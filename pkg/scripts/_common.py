"""Dataclass-config command lines and CSV output for the experiment scripts."""
from __future__ import annotations

import argparse
import dataclasses
import typing
from pathlib import Path

from acctrack.metrics import write_rows


def parse_config(cls, description: str):
    """Build ``cls`` from ``--field value`` flags; tuple fields take several values."""
    p = argparse.ArgumentParser(description=description)
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        hint = hints[f.name]
        flag = "--" + f.name.replace("_", "-")
        if typing.get_origin(hint) is tuple:
            p.add_argument(flag, nargs="+", type=typing.get_args(hint)[0], default=default)
        else:
            p.add_argument(flag, type=hint, default=default)
    args = p.parse_args()
    return cls(**{f.name: (tuple(v) if isinstance(v, list) else v)
                  for f, v in ((f, getattr(args, f.name)) for f in dataclasses.fields(cls))})


def save(rows, out: str, name: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    write_rows(rows, path / name)
    print(f"wrote {path / name}")
    return path / name
