"""INI run configuration with typed defaults, typo protection and an echo file."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


def _flag(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


# section -> key -> (parser, default text)
SCHEMA = {
    "potential": {
        "kind": (str, "lj"),
        "A": (float, "8.0"),
        "p": (float, "2.0"),
        "q": (float, "1.0"),
        "D": (float, "1.5"),
        "cutoff": (float, "2.5"),
        "table": (str, ""),
    },
    "weighting": {
        "kind": (str, "constant-mollified"),
        "epsilon_ratio": (float, "0.5"),
        "gaussian_cutoff": (float, "6.0"),
    },
    "md": {
        "dt": (float, "0.002"),
        "steps": (int, "20000"),
        "stride": (int, "50"),
        "seed": (int, "7"),
        "temperature": (float, "0.2"),
        "equilibration": (int, "2000"),
        "skin": (float, "0.3"),
    },
    "minimize": {
        "ftol": (float, "1e-8"),
        "maxiter": (int, "20000"),
    },
    "grid": {
        "points": (int, "40"),
        "da_points": (int, "12"),
        "line_points": (int, "41"),
    },
    "experiment": {
        "lattice_constant": (float, "1.556517851"),
        "cells": (int, "10"),
        "sigma": (float, "1.0"),
        "sizes": (_floats, "1 2 3 4 6 8 10"),
        "plane_offset_max": (float, "0.1"),
        "plane_steps": (int, "21"),
        "plate_cells": (int, "40"),
        "plate_thickness": (int, "4"),
        "hole_radius": (float, "8.0"),
        "domain_fraction": (float, "0.1"),
        "c11": (float, "87.65222"),
        "c12": (float, "50.37899"),
        "c44": (float, "50.37899"),
        "offset": (float, "0.013"),
    },
}

# overrides that distinguish the experiments from the shared defaults
EXPERIMENT_DEFAULTS = {
    1: {"md": {"temperature": "0.2", "steps": "20000", "stride": "50"}},
    2: {"md": {"temperature": "0.1", "steps": "6000", "stride": "5", "equilibration": "2000"}},
    3: {"experiment": {"sigma": "1.0"}},
    4: {"experiment": {"sigma": "0.5"}},
}

FULL_PLATE = {"plate_cells": "100", "plate_thickness": "10", "hole_radius": "16.06"}


@dataclass
class RunConfig:
    """Resolved configuration: ``values[section][key]`` is typed, ``text`` keeps the source text."""

    text: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section: str, key: str, value) -> None:
        self.text.setdefault(section, {})[key] = str(value)
        self.values = _typed(self.text)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for sec in SCHEMA:
            cp[sec] = {k: self.text[sec][k] for k in SCHEMA[sec]}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def echo(self, outdir) -> Path:
        path = Path(outdir) / "config.ini"
        path.write_text(self.to_ini())
        return path


def _typed(text: dict) -> dict:
    out = {}
    for sec, keys in SCHEMA.items():
        out[sec] = {}
        for key, (parse, _) in keys.items():
            raw = text[sec][key]
            try:
                out[sec][key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from None
    return out


def load_config(source=None, experiment: int | None = None, full_plate: bool = False) -> RunConfig:
    """Merge defaults, experiment overrides and an INI file or string.

    Unknown sections or keys raise :class:`ConfigError`.
    """
    text = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    if experiment is not None:
        for sec, kv in EXPERIMENT_DEFAULTS.get(experiment, {}).items():
            text[sec].update(kv)
    if full_plate:
        text["experiment"].update(FULL_PLATE)
    if source is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            if isinstance(source, (str, Path)) and Path(source).exists():
                cp.read(source)
            elif isinstance(source, str) and "[" in source:
                cp.read_string(source)
            else:
                raise ConfigError(f"config file {source} not found")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in cp[sec].items():
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                text[sec][key] = val
    return RunConfig(text, _typed(text))
