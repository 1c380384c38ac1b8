"""Run configuration: YAML files with a fixed key hierarchy.

Top-level sections (all optional unless a command needs them)::

    name, description
    system:    kind (lorenz|limit_cycle), sigma, R, B, init, dt, t_discard
    data:      source (simulate|csv), path, time_col, value_col, tau, length
               (or n_records), component (int or "all"), normalize,
               gap_factor, t_max
    machine:   arch (delayed_scalar|vector), M, N, transfer, include_current_in_hidden
    bounds:    c_u, c_beta, c_v, c_b
    schedule:  checkpoint_every, max_attempts, stop_lambda, dense_every,
               dense_until, refresh_every
    section:   c, direction, T, component, interp
    free_run:  n_discard, n_record, amplitude_guard
    scan:      axis, values | {start, stop, num}, inits
    section_map: c, T1, T2
    seeds:     machine, trainer
    output:    dir

Environment variables ``MCDYN_<SECTION>__<KEY>`` override single keys,
e.g. ``MCDYN_MACHINE__N=200`` or ``MCDYN_SCHEDULE__MAX_ATTEMPTS=1000``.
Values are parsed as YAML scalars.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .analysis import Direction, Interp, SectionConfig
from .dynsys import SystemKind, SystemSpec
from .errors import ConfigError
from .machine import Arch, Bounds, FreeRunConfig, Transfer
from .trainer import TrainSchedule

ENV_PREFIX = "MCDYN_"

SCHEMA: dict[str, tuple[str, ...]] = {
    "system": ("kind", "sigma", "R", "B", "init", "dt", "t_discard"),
    "data": ("source", "path", "time_col", "value_col", "tau", "length", "n_records",
             "component",
             "normalize", "gap_factor", "t_max"),
    "machine": ("arch", "M", "N", "transfer", "include_current_in_hidden"),
    "bounds": ("c_u", "c_beta", "c_v", "c_b"),
    "schedule": ("checkpoint_every", "max_attempts", "stop_lambda", "dense_every",
                 "dense_until", "refresh_every"),
    "section": ("c", "direction", "T", "component", "interp"),
    "free_run": ("n_discard", "n_record", "amplitude_guard"),
    "scan": ("axis", "values", "inits"),
    "section_map": ("c", "T1", "T2"),
    "seeds": ("machine", "trainer"),
    "output": ("dir",),
}
TOP_LEVEL = ("name", "description", *SCHEMA)


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("mcdyn.presets").iterdir()
                  if p.name.endswith(".yaml"))


def resolve_config_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    cand = resources.files("mcdyn.presets").joinpath(f"{name_or_path}.yaml")
    if cand.is_file():
        return Path(str(cand))
    raise ConfigError(f"no config file or preset named {name_or_path!r}")


def package_data(name: str) -> Path:
    return Path(str(resources.files("mcdyn.data").joinpath(name)))


def apply_env(raw: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    for var, text in environ.items():
        if not var.startswith(ENV_PREFIX) or "__" not in var:
            continue
        sec, key = var[len(ENV_PREFIX):].split("__", 1)
        sec = sec.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"{var}: unknown config section {sec!r}")
        match = [k for k in SCHEMA[sec] if k.lower() == key.lower()]
        if not match:
            raise ConfigError(f"{var}: unknown key {key!r} in section {sec!r}")
        raw.setdefault(sec, {})[match[0]] = yaml.safe_load(text)
    return raw


@dataclass
class RunConfig:
    """Validated view over the raw mapping; sections are checked on access."""

    raw: dict[str, Any] = field(default_factory=dict)
    source: str = "<dict>"

    def __post_init__(self):
        if not isinstance(self.raw, dict):
            raise ConfigError("config must be a mapping")
        for key, val in self.raw.items():
            if key not in TOP_LEVEL:
                raise ConfigError(f"unknown config key: {key}")
            if key in SCHEMA:
                if not isinstance(val, dict):
                    raise ConfigError(f"config key {key} must be a mapping")
                for sub in val:
                    if sub not in SCHEMA[key]:
                        raise ConfigError(f"unknown config key: {key}.{sub}")

    @classmethod
    def load(cls, name_or_path: str, environ=None) -> "RunConfig":
        path = resolve_config_path(name_or_path)
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls(apply_env(raw, environ), str(path))

    # -- helpers -----------------------------------------------------------
    def section(self, name: str) -> dict:
        return self.raw.get(name) or {}

    def need(self, sec: str, key: str):
        s = self.raw.get(sec)
        if s is None or key not in s or s[key] is None:
            raise ConfigError(f"missing config key: {sec}.{key}")
        return s[key]

    def get(self, sec: str, key: str, default=None):
        val = self.section(sec).get(key)
        return default if val is None else val

    def _enum(self, cls, sec, key, default=None):
        val = self.get(sec, key, default) if default is not None else self.need(sec, key)
        try:
            return cls(val)
        except ValueError:
            opts = ", ".join(e.value for e in cls)
            raise ConfigError(f"{sec}.{key}: {val!r} is not one of {opts}") from None

    def _num(self, sec, key, default=None, kind=float):
        val = self.need(sec, key) if default is None else self.get(sec, key, default)
        try:
            return kind(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{sec}.{key}: expected a number, got {val!r}") from None

    # -- typed sections ----------------------------------------------------
    @property
    def name(self) -> str:
        return str(self.raw.get("name") or Path(self.source).stem)

    def system(self) -> SystemSpec:
        kind = self._enum(SystemKind, "system", "kind")
        if kind is SystemKind.LORENZ:
            p = tuple(self._num("system", k) for k in ("sigma", "R", "B"))
            return SystemSpec(kind, p)
        return SystemSpec(kind)

    def system_init(self) -> np.ndarray:
        spec = self.system()
        default = [1.0, 1.0, 1.0] if spec.dim == 3 else [0.5, 0.0]
        init = np.asarray(self.get("system", "init", default), dtype=float)
        if init.size != spec.dim:
            raise ConfigError(f"system.init must have {spec.dim} components")
        return init

    def bounds(self) -> Bounds:
        vals = [self._num("bounds", k) for k in ("c_u", "c_beta", "c_v", "c_b")]
        try:
            return Bounds(*vals)
        except ValueError as exc:
            raise ConfigError(f"bounds: {exc}") from None

    def arch(self) -> Arch:
        return self._enum(Arch, "machine", "arch")

    def transfer(self) -> Transfer:
        return self._enum(Transfer, "machine", "transfer", "gaussian_exp")

    def schedule(self) -> TrainSchedule:
        stop = self.get("schedule", "stop_lambda")
        dense = self.get("schedule", "dense_every")
        try:
            return TrainSchedule(
                checkpoint_every=self._num("schedule", "checkpoint_every", 200_000, int),
                max_attempts=self._num("schedule", "max_attempts", 20_000_000, int),
                stop_lambda=None if stop is None else float(stop),
                dense_every=None if dense is None else int(dense),
                dense_until=self._num("schedule", "dense_until", 0, int),
            )
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from None

    def refresh_every(self) -> int:
        return self._num("schedule", "refresh_every", 1_000_000, int)

    def section_config(self) -> SectionConfig:
        return SectionConfig(
            c=self._num("section", "c", 5.0),
            direction=self._enum(Direction, "section", "direction", "from_above"),
            T=self._num("section", "T", 0.01),
            component=self._num("section", "component", 0, int),
            interp=self._enum(Interp, "section", "interp", "linear"),
        )

    def free_run(self) -> FreeRunConfig:
        try:
            return FreeRunConfig(
                n_discard=self._num("free_run", "n_discard", 20000, int),
                n_record=self._num("free_run", "n_record", 50000, int),
                amplitude_guard=self._num("free_run", "amplitude_guard", 10.0),
            )
        except ValueError as exc:
            raise ConfigError(f"free_run: {exc}") from None

    def scan_values(self) -> list[float]:
        vals = self.need("scan", "values")
        if isinstance(vals, dict):
            try:
                return np.linspace(float(vals["start"]), float(vals["stop"]), int(vals["num"])).tolist()
            except KeyError as exc:
                raise ConfigError(f"missing config key: scan.values.{exc.args[0]}") from None
        return [float(v) for v in vals]

    def seed(self, which: str) -> int:
        defaults = {"machine": 1, "trainer": 2}
        return self._num("seeds", which, defaults[which], int)

    def output_dir(self) -> Path:
        return Path(self.get("output", "dir", f"runs/{self.name}"))
