"""Run configuration: file format, flag overrides, and echoing for provenance.

The config file is flat TOML (key = value).  Every run's resolved
configuration is serialized back into the output header so a result can be
reproduced from the file alone; parse(emit(config)) == config is tested.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .potential import (
    AbsorberParams,
    Grating,
    Surface,
    SurfacePotential,
    load_surface,
)
from .solver import GridSpec

DEFAULT_ABSORBER = AbsorberParams()


def parse_angles(spec: str) -> np.ndarray:
    """Parse 'start:stop:count[log|lin]' (mrad) into radians.

    '0.1:25:60log' gives 60 log-spaced grazing angles from 0.1 to 25 mrad.
    Spacing defaults to log.
    """
    s = spec.strip()
    if s.endswith("log"):
        mode, s = "log", s[:-3]
    elif s.endswith("lin"):
        mode, s = "lin", s[:-3]
    else:
        mode = "log"
    parts = s.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad angle spec {spec!r}; expected start:stop:count[log|lin]")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1 or start <= 0 or stop < start:
        raise ValueError(f"bad angle spec {spec!r}")
    if count == 1:
        grid = np.array([start])
    elif mode == "log":
        grid = np.geomspace(start, stop, count)
    else:
        grid = np.linspace(start, stop, count)
    return grid * 1e-3


@dataclass(frozen=True)
class RunConfig:
    """Everything a scan needs; fully serializable with round-trip identity."""

    surface: str = "glass_slide"
    t0: tuple = (8.7,)  # K, one scan per temperature
    angles: str = "0.1:25:60log"  # mrad spec string
    absorber_amplitude: float = DEFAULT_ABSORBER.amplitude
    absorber_alpha: float = DEFAULT_ABSORBER.alpha
    absorber_zi: float = DEFAULT_ABSORBER.z_i
    absorber_enabled: bool = True
    n_max: int = -1  # -1: use the surface preset's truncation
    points_per_wavelength: float = 24.0
    tail_fraction: float = 0.125
    z_min: float = -13.0
    z_max: float = 2000.0
    out: str = "."
    # inline surface parameters; used only when surface == "custom"
    chi: float = 0.5
    c3_si: float = 3.5e-50
    l: float = 93.0

    def absorber(self) -> AbsorberParams:
        return AbsorberParams(
            amplitude=self.absorber_amplitude,
            alpha=self.absorber_alpha,
            z_i=self.absorber_zi,
            enabled=self.absorber_enabled,
        )

    def grid(self) -> GridSpec:
        return GridSpec(
            z_min=self.z_min,
            z_max=self.z_max,
            points_per_wavelength=self.points_per_wavelength,
            tail_fraction=self.tail_fraction,
        )

    def surface_obj(self) -> Surface:
        if self.surface == "custom":
            pot = SurfacePotential.from_si(chi=self.chi, c3_si=self.c3_si, l=self.l)
            return Surface(name="custom", potential=pot, grating=None)
        return load_surface(self.surface, n_max=None if self.n_max < 0 else self.n_max)

    def angle_grid(self) -> np.ndarray:
        return parse_angles(self.angles)


def _emit_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isinf(x) or math.isnan(x):
            raise ValueError("cannot serialize non-finite value")
        s = repr(x)
        return s if ("." in s or "e" in s or "E" in s) else s + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_emit_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def emit(config: RunConfig) -> str:
    """Serialize to flat TOML, keys in declaration order."""
    lines = []
    for f in fields(config):
        lines.append(f"{f.name} = {_emit_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> RunConfig:
    """Parse TOML text into a RunConfig; unknown keys are rejected."""
    data = tomllib.loads(text)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "t0" in data:
        t0 = data["t0"]
        data["t0"] = tuple(float(x) for x in (t0 if isinstance(t0, list) else [t0]))
    return RunConfig(**data)


def load(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())
