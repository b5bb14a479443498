"""Writers for report JSON, point-cloud and grid CSV files, and PGM heatmaps.

Every file carries the config hash.  Floats are written with 17 significant
digits so that reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .fields import GridField
from .roots import RootCloud


def _num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_json(path: Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n")


def write_points_csv(path: Path, cloud: RootCloud, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash} weight_denominator={cloud.weight_denominator}", "re,im,multiplicity,residual"]
    for z, m, r in zip(cloud.locations, cloud.multiplicities, cloud.residuals):
        lines.append(f"{_num(z.real)},{_num(z.imag)},{int(m)},{_num(r)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_points_csv(path: Path) -> RootCloud:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")][1:]
    head = Path(path).read_text().splitlines()[0]
    den = int(head.split("weight_denominator=")[1])
    arr = np.array([[float(x) for x in r.split(",")] for r in rows]).reshape(-1, 4)
    return RootCloud(arr[:, 0] + 1j * arr[:, 1], arr[:, 2].astype(np.int64), arr[:, 3], den)


def write_grid_csv(path: Path, fld: GridField, config_hash: str, name: str) -> None:
    """Row-major values, one grid row (fixed imaginary part) per line, ``nan`` where masked."""
    r = fld.rect
    nx, ny = fld.res
    lines = [
        f"# config_hash={config_hash}",
        f"# field={name} rect={_num(r.xmin)},{_num(r.xmax)},{_num(r.ymin)},{_num(r.ymax)} res={nx},{ny}",
    ]
    vals = np.where(fld.mask, fld.values, np.nan)
    for row in vals:
        lines.append(",".join(_num(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(path: Path, fld: GridField, config_hash: str, vrange=None) -> tuple[float, float]:
    """8-bit binary PGM, linear ramp on ``vrange``; top row is ``ymax``; masked pixels are 0."""
    vals = fld.values[fld.mask]
    if vrange is not None:
        lo, hi = map(float, vrange)
    elif vals.size:
        lo, hi = float(vals.min()), float(vals.max())
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo if hi > lo else 1.0
    img = np.clip((fld.values - lo) / span, 0.0, 1.0) * 255.0
    img = np.where(fld.mask, np.rint(img), 0).astype(np.uint8)[::-1]
    nx, ny = fld.res
    header = f"P5\n# config_hash={config_hash} range={_num(lo)},{_num(hi)}\n{nx} {ny}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())
    return lo, hi
