"""On-disk format for grid samples: a JSON header next to a raw little-endian payload.

The header names the payload file, its dtype and shape, so either file can be
inspected on its own.  Complex payloads are stored as interleaved ``re, im``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .spectral import GridFunction, SpectrumGrid

FORMAT_VERSION = 1


def _payload_path(header_path: Path) -> Path:
    return header_path.with_suffix(".bin")


def save_grid(f: GridFunction, path) -> Path:
    path = Path(path)
    payload = _payload_path(path)
    header = {
        "kind": "GridFunction",
        "formatVersion": FORMAT_VERSION,
        "dimension": f.dimension,
        "resolution": f.resolution,
        "center": f.center.tolist(),
        "halfWidth": f.half_width.tolist(),
        "dtype": "<f8",
        "shape": list(f.values.shape),
        "payload": payload.name,
    }
    np.ascontiguousarray(f.values, dtype="<f8").tofile(payload)
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return payload


def save_spectrum(s: SpectrumGrid, path) -> Path:
    path = Path(path)
    payload = _payload_path(path)
    header = {
        "kind": "SpectrumGrid",
        "formatVersion": FORMAT_VERSION,
        "dimension": s.dimension,
        "cutoff": s.cutoff,
        "tailMass": s.tail_mass,
        "axes": [a.tolist() for a in s.axes],
        "dtype": "<c16",
        "shape": list(s.amplitudes.shape),
        "payload": payload.name,
    }
    np.ascontiguousarray(s.amplitudes, dtype="<c16").tofile(payload)
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return payload


def load(path):
    """Read either kind back from its header path."""
    path = Path(path)
    header = json.loads(path.read_text())
    data = np.fromfile(path.parent / header["payload"], dtype=header["dtype"])
    data = data.reshape(header["shape"])
    if header["kind"] == "GridFunction":
        return GridFunction(np.asarray(header["center"]), np.asarray(header["halfWidth"]), data)
    if header["kind"] == "SpectrumGrid":
        return SpectrumGrid(tuple(np.asarray(a) for a in header["axes"]), data, header["cutoff"], header["tailMass"])
    raise ValueError(f"unknown grid kind {header['kind']!r}")


def tabulate_csv(func, x, path, header=("x", "value")):
    """Write ``(x, func(x))`` rows for plotting."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(func(x), dtype=float)
    np.savetxt(path, np.column_stack([x, y]), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
