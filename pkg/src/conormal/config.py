"""Run configuration: INI-style sections of flat key = value pairs.

[system]    preset, omega, eps, phase, period, b, coefficients, n, mass, kappa
[boundary]  type, q0, q1, winding, shift, k, matrix, offset
[solver]    step, tol, seeds, box_lo, box_hi, seed, merge_tol
[index]     mesh, grid, mu_grid, omegas
[morse]     classes, nodes, starts
[maslov]    path, target, grid
[output]    json, csv
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

import numpy as np

from . import boundary as bmod
from .lagrangian import ElectromagneticLagrangian
from .presets import LAGRANGIAN_PRESETS


class ConfigError(ValueError):
    pass


SCHEMA = {
    "system": {"preset": str, "omega": float, "eps": float, "phase": float, "period": float, "b": float,
               "coefficients": "floats", "n": int, "mass": float, "kappa": float},
    "boundary": {"type": str, "q0": "floats", "q1": "floats", "winding": "ints", "shift": "floats",
                 "k": int, "matrix": "matrix", "offset": "floats"},
    "solver": {"step": float, "tol": float, "seeds": int, "box_lo": float, "box_hi": float, "seed": int,
               "merge_tol": float},
    "index": {"mesh": int, "grid": int, "mu_grid": int, "omegas": "floats"},
    "morse": {"classes": "ints", "nodes": int, "starts": int},
    "maslov": {"path": str, "target": str, "grid": int},
    "output": {"json": str, "csv": str},
}

POSITIVE = {"step", "tol", "seeds", "merge_tol", "mesh", "grid", "mu_grid", "nodes", "starts", "period", "mass"}


def _convert(kind, raw: str):
    raw = raw.strip()
    if kind is str:
        return raw
    if kind in (int, float):
        return kind(raw)
    if kind == "floats":
        return [float(v) for v in re.split(r"[,\s]+", raw) if v]
    if kind == "ints":
        return [int(v) for v in re.split(r"[,\s]+", raw) if v]
    if kind == "matrix":
        return [[float(v) for v in re.split(r"[,\s]+", row.strip()) if v] for row in raw.split(";") if row.strip()]
    raise AssertionError(kind)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: {} for s in SCHEMA})

    def get(self, section, key, default=None):
        return self.values.get(section, {}).get(key, default)

    def set(self, section, key, value):
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        self.values[section][key] = value

    def merged(self, overrides: dict) -> "RunConfig":
        out = RunConfig({s: dict(v) for s, v in self.values.items()})
        for (section, key), value in overrides.items():
            if value is not None:
                out.set(section, key, value)
        out.validate()
        return out

    def validate(self):
        for section, items in self.values.items():
            for key, value in items.items():
                if key in POSITIVE and value is not None and value <= 0:
                    raise ConfigError(f"{section}.{key} must be positive")


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return lineno
    return 0


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            line = next((i for i, l in enumerate(text.splitlines(), 1) if l.strip() == f"[{section}]"), 0)
            raise ConfigError(f"{source}:{line}: unknown section [{section}]")
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}:{line}: unknown key '{key}' in [{section}]")
            try:
                cfg.values[section][key] = _convert(SCHEMA[section][key], raw)
            except ValueError:
                raise ConfigError(f"{source}:{line}: cannot parse {section}.{key} = {raw!r}") from None
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------- builders


def build_lagrangian(cfg: RunConfig) -> ElectromagneticLagrangian:
    preset = cfg.get("system", "preset", "harmonic")
    if preset not in LAGRANGIAN_PRESETS:
        raise ConfigError(f"unknown system preset {preset!r}; choose from {sorted(LAGRANGIAN_PRESETS)}")
    g = lambda key, default: cfg.get("system", key, default)
    if preset == "harmonic":
        return LAGRANGIAN_PRESETS[preset](g("omega", 1.0), g("n", 1))
    if preset == "free":
        period = g("period", None)
        n = g("n", 1)
        return LAGRANGIAN_PRESETS[preset](n, None if period is None else np.full(n, period), g("mass", 1.0))
    if preset == "pendulum":
        return LAGRANGIAN_PRESETS[preset](g("eps", 0.1), g("phase", 1.0), g("period", 1.0))
    if preset == "magnetic":
        return LAGRANGIAN_PRESETS[preset](g("b", 1.0), g("omega", 0.0))
    if preset == "polynomial":
        coeffs = g("coefficients", None)
        if not coeffs:
            raise ConfigError("system.coefficients is required for the polynomial preset")
        return LAGRANGIAN_PRESETS[preset](coeffs)
    return LAGRANGIAN_PRESETS[preset](g("kappa", 5.0))


def build_boundary(cfg: RunConfig, n: int, periods=None) -> bmod.NonlocalBoundary:
    kind = cfg.get("boundary", "type", "dirichlet")
    g = lambda key, default: cfg.get("boundary", key, default)
    winding = np.zeros(n) if g("winding", None) is None else np.broadcast_to(np.asarray(g("winding", None), float), (n,))
    if np.any(winding) and periods is None:
        raise ConfigError("boundary.winding needs a periodic system (set system.period)")
    lift = winding * (0 if periods is None else periods)
    if kind == "dirichlet":
        q0 = np.broadcast_to(np.asarray(g("q0", [0.0]), float), (n,))
        q1 = np.broadcast_to(np.asarray(g("q1", [0.0]), float), (n,))
        return bmod.dirichlet(q0, q1 + lift)
    if kind == "neumann":
        return bmod.neumann(n)
    if kind in ("diagonal", "periodic"):
        shift = np.broadcast_to(np.asarray(g("shift", [0.0]), float), (n,)) + lift
        return bmod.diagonal(n, shift)
    if kind == "figure8":
        if n % 2:
            raise ConfigError("figure8 needs an even-dimensional base M = O x O")
        return bmod.figure_eight(n // 2)
    if kind in ("custom", "linear", "product"):
        mat = g("matrix", None)
        if mat is None:
            raise ConfigError(f"boundary.matrix is required for type {kind}")
        mat = np.asarray(mat, float)
        if mat.shape[1] != 2 * n:
            raise ConfigError(f"boundary.matrix must have {2 * n} columns")
        try:
            return bmod.linear(mat, g("offset", None), kind=kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown boundary type {kind!r}")
