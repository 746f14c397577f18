"""Sensor-grid field containers and their on-disk format.

A field is a (sensors x time) matrix sampled on the fixed wing grid, stored
as a plain-text header next to a binary .npy matrix. Sensors are ordered
chord-major: row = spanwise_index * n_chord + chord_index, i.e. the chord
index varies fastest.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

N_SPAN = 51
N_CHORD = 26
N_SENSORS = N_SPAN * N_CHORD
GRID_SPACING_MM = 1.0


def grid_coordinates():
    """(x_mm, y_mm) arrays of length 1326 in chord-major sensor order."""
    iy, ix = np.divmod(np.arange(N_SENSORS), N_CHORD)
    return ix * GRID_SPACING_MM, iy * GRID_SPACING_MM


@dataclass
class GridField:
    """Values per grid sensor per time sample."""

    values: np.ndarray                  # (N_SENSORS, T)
    t_start_ms: float
    sample_rate_khz: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[0] != N_SENSORS:
            raise ValueError(f"values must be ({N_SENSORS}, T), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def times_ms(self) -> np.ndarray:
        step = 1.0 / self.sample_rate_khz
        return self.t_start_ms + step * np.arange(self.n_samples)


# StrainField and EncodedField share the container; the header's kind entry
# and meta block distinguish them.
StrainField = GridField
EncodedField = GridField


def _format_meta_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_field(f: GridField, base_path: str, kind: str = "strain") -> None:
    """Write <base>.header.txt and <base>.values.npy."""
    lines = [
        f"kind: {kind}",
        f"n_span: {N_SPAN}",
        f"n_chord: {N_CHORD}",
        f"grid_spacing_mm: {GRID_SPACING_MM}",
        f"sample_rate_khz: {_format_meta_value(f.sample_rate_khz)}",
        f"t_start_ms: {_format_meta_value(f.t_start_ms)}",
        f"n_samples: {f.n_samples}",
    ]
    for k in sorted(f.meta):
        lines.append(f"meta.{k}: {_format_meta_value(f.meta[k])}")
    with open(base_path + ".header.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    np.save(base_path + ".values.npy", f.values)


def load_field(base_path: str) -> GridField:
    """Read a field written by save_field; bit-exact round trip."""
    header_path = base_path + ".header.txt"
    if not os.path.exists(header_path):
        raise FileNotFoundError(header_path)
    entries = {}
    with open(header_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, val = line.partition(":")
            entries[key.strip()] = val.strip()
    values = np.load(base_path + ".values.npy")
    meta = {k[len("meta."):]: v for k, v in entries.items() if k.startswith("meta.")}
    out = GridField(
        values=values,
        t_start_ms=float(entries["t_start_ms"]),
        sample_rate_khz=float(entries["sample_rate_khz"]),
        meta=meta,
    )
    if out.n_samples != int(entries["n_samples"]):
        raise ValueError("header sample count does not match matrix")
    return out
