"""Run configuration: TOML parsing, validation, and defaults.

Every omitted key falls back to the default recorded here. schema_version
is mandatory and pinned to 1 so future layouts can migrate cleanly.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


GRID_DEFAULTS = {"n_points": 8, "x_min": -2.39, "x_max": 2.39}
KINETIC_DEFAULTS = {"mass": 1836.15267343, "sigma": None, "m_daf": 20}
DYNAMICS_DEFAULTS = {
    "dt_fs": 0.5,
    "n_steps": 32768,
    "backend": "oracle",
    "remap_mode": "exact_phase",
}
INITIAL_DEFAULTS = {"variant": "site", "params": [0]}
NOISE_DEFAULTS = {
    "enabled": False,
    "fidelity_1q": 0.995,
    "fidelity_ms": 0.97,
    "fidelity_cnot": 0.965,
    "readout_flip": 0.01,
}


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    potential_source: str
    grid: dict
    kinetic: dict
    dynamics: dict
    initial: dict
    noise: dict
    shots: int | None
    seed: int
    output_dir: str

    @property
    def noise_enabled(self) -> bool:
        return bool(self.noise["enabled"])


def _merge(section: dict, defaults: dict, name: str) -> dict:
    unknown = set(section) - set(defaults)
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(section)
    return merged


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    overrides (from CLI flags) replace top-level keys after parsing.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if "schema_version" not in raw:
        raise ConfigError(f"{path}: schema_version is required")
    if raw["schema_version"] != 1:
        raise ConfigError(f"{path}: unsupported schema_version {raw['schema_version']}")

    potential = raw.get("potential", {})
    source = potential.get("source", "builtin_dmanh")
    if source != "builtin_dmanh":
        base = os.path.dirname(os.path.abspath(path))
        resolved = source if os.path.isabs(source) else os.path.join(base, source)
        if not os.path.exists(resolved):
            raise ConfigError(f"potential file does not exist: {resolved}")
        source = resolved

    grid = _merge(raw.get("grid", {}), GRID_DEFAULTS, "grid")
    kinetic = _merge(raw.get("kinetic", {}), KINETIC_DEFAULTS, "kinetic")
    dynamics = _merge(raw.get("dynamics", {}), DYNAMICS_DEFAULTS, "dynamics")
    initial = _merge(raw.get("initial", {}), INITIAL_DEFAULTS, "initial")
    noise = _merge(raw.get("noise", {}), NOISE_DEFAULTS, "noise")

    if dynamics["backend"] not in ("oracle", "circuit_ideal", "circuit_noisy"):
        raise ConfigError(f"unknown backend {dynamics['backend']!r}")
    if dynamics["remap_mode"] not in ("exact_phase", "first_order"):
        raise ConfigError(f"unknown remap_mode {dynamics['remap_mode']!r}")
    if initial["variant"] not in ("site", "two_site", "eigenstate"):
        raise ConfigError(f"unknown initial variant {initial['variant']!r}")
    if dynamics["dt_fs"] <= 0 or dynamics["n_steps"] < 1:
        raise ConfigError("dynamics.dt_fs must be > 0 and n_steps >= 1")

    cfg = {
        "schema_version": 1,
        "potential_source": source,
        "grid": grid,
        "kinetic": kinetic,
        "dynamics": dynamics,
        "initial": initial,
        "noise": noise,
        "shots": raw.get("shots"),
        "seed": int(raw.get("seed", 0)),
        "output_dir": raw.get("output_dir", "out"),
    }
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**cfg)
