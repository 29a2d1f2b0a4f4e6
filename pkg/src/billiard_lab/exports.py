"""CSV/PGM/JSON artifact writers with reproducibility headers.

Every file starts with comment lines carrying the config hash and the RNG
seed; the timestamp line is suppressed under --reproducible so identical
configs produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _header_lines(config: dict, reproducible: bool) -> list:
    lines = [
        f"# config_hash={config_hash(config)}",
        f"# seed={config.get('seed', 0)}",
    ]
    if not reproducible:
        lines.append(f"# timestamp={time.strftime('%Y-%m-%dT%H:%M:%S')}")
    return lines


def write_csv(path, config: dict, columns: list, rows, reproducible: bool = False,
              fmt: str = "%.12g"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in _header_lines(config, reproducible):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(
                (fmt % v) if isinstance(v, float) else str(v) for v in row
            ) + "\n")
    return path


def write_json(path, config: dict, payload: dict, reproducible: bool = False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config_hash": config_hash(config), "seed": config.get("seed", 0)}
    if not reproducible:
        doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def write_pgm(path, grid_occupied: np.ndarray):
    """Raw (P5) PGM raster of a cell grid; rows flipped so r=+1 is on top."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = (~grid_occupied.T[::-1]).astype(np.uint8) * 255
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
    return path


def orbit_rows(curve, diss, s0: float, r0: float, n: int):
    """Rows for the orbit dump format: step, s, s_over_P, r, tau, det_jacobian."""
    from .dynamics import PhasePoint, jacobian, step_dissipative_many

    P = curve.perimeter
    rows = []
    s = np.array([float(s0)])
    r = np.array([float(r0)])
    for k in range(n):
        J, fac = jacobian(curve, diss, PhasePoint(float(s[0]), float(r[0])))
        det = float(np.linalg.det(J))
        rows.append((k, float(s[0]), float(s[0]) / P, float(r[0]), fac.tau, det))
        s, r, _, _ = step_dissipative_many(curve, diss, s, r)
    rows.append((n, float(s[0]), float(s[0]) / P, float(r[0]), float("nan"), float("nan")))
    return rows
