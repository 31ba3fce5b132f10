"""Experiment configuration files.

A config is a flat TOML document whose keys may carry dotted section
prefixes, e.g.::

    trials = 10000
    topology.fc = "60,115"
    topology.chs = "10,10; 60,15; 110,40"

Every key is optional; missing keys take the values in ``DEFAULTS``.
"""
from __future__ import annotations

import hashlib
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import Position
from .harness import ExperimentConfig
from .network import Topology
from .numerics import DomainError
from .planner import Objective

__all__ = ["ConfigError", "DEFAULTS", "LoadedConfig", "load_config", "build_config", "parse_override", "default_config_path"]


class ConfigError(Exception):
    """Unreadable, unparsable or ill-typed configuration."""


DEFAULTS: dict[str, Any] = {
    "seed": 20240521,
    "trials": 10000,
    "k_sweep": "1,2,4,8,16",
    "l_sweep": "1,2,3",
    "wavelength": 0.125,
    "alpha": 2.0,
    "p_ref": 1e-6,
    "shadow_var_db": 1.0,
    "objective": "G2",
    "estimation_noise_var": 0.0,
    "planner.ell_d": None,
    "planner.ell_u": None,
    "planner.phi": 0.0,
    "topology.fc": "60,115",
    "topology.chs": "10,10; 60,15; 110,40",
    "topology.mr_start": "60,60",
    "topology.roi": "120,120",
    "topology.sensors": 300,
}


class LoadedConfig:
    def __init__(self, path: Path, raw: bytes, values: dict[str, Any]):
        self.path = path
        self.raw = raw
        self.values = values

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()

    def experiment(self) -> ExperimentConfig:
        return build_config(self.values)


def default_config_path() -> Path:
    return Path(str(resources.files("mda_sim").joinpath("default.toml")))


def _flatten(doc: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _check_keys(keys: Iterable[str]) -> None:
    unknown = [k for k in keys if k not in DEFAULTS]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")


def parse_override(item: str) -> tuple[str, Any]:
    """``KEY=VALUE`` with VALUE read as a TOML value, else as a bare string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    key, text = (part.strip() for part in item.split("=", 1))
    _check_keys([key])
    try:
        value = tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        value = text
    return key, value


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> LoadedConfig:
    path = Path(path) if path is not None else default_config_path()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    values = _flatten(doc)
    _check_keys(values)
    for item in overrides:
        key, value = parse_override(item)
        values[key] = value
    merged = dict(DEFAULTS)
    merged.update(values)
    return LoadedConfig(path, raw, merged)


def _ints(value: Any, key: str) -> tuple[int, ...]:
    items = value if isinstance(value, list) else str(value).replace(";", ",").split(",")
    try:
        out = tuple(int(str(v).strip()) for v in items if str(v).strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected integers, got {value!r}") from exc
    return out


def _pair(value: Any, key: str) -> tuple[float, float]:
    items = value if isinstance(value, list) else str(value).split(",")
    try:
        x, y = (float(str(v).strip()) for v in items)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected 'x,y', got {value!r}") from exc
    return x, y


def _position(value: Any, key: str) -> Position:
    try:
        return Position(*_pair(value, key))
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _number(value: Any, key: str, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def build_config(values: dict[str, Any]) -> ExperimentConfig:
    """Typed experiment config from flat key/value pairs."""
    chs_raw = values["topology.chs"]
    if isinstance(chs_raw, list) and chs_raw and isinstance(chs_raw[0], list):
        chs = tuple(_position(c, "topology.chs") for c in chs_raw)
    else:
        chs = tuple(_position(c, "topology.chs") for c in str(chs_raw).split(";") if c.strip())
    topo = Topology(
        fc=_position(values["topology.fc"], "topology.fc"),
        chs=chs,
        mr_start=_position(values["topology.mr_start"], "topology.mr_start"),
        roi=_pair(values["topology.roi"], "topology.roi"),
        n_sensors=_number(values["topology.sensors"], "topology.sensors", int),
    )
    try:
        objective = Objective(str(values["objective"]).upper())
    except ValueError as exc:
        raise ConfigError(f"objective: expected G1 or G2, got {values['objective']!r}") from exc
    opt = lambda k: None if values[k] is None else _number(values[k], k)  # noqa: E731
    return ExperimentConfig(
        topology=topo,
        wavelength=_number(values["wavelength"], "wavelength"),
        alpha=_number(values["alpha"], "alpha"),
        p_ref=_number(values["p_ref"], "p_ref"),
        shadow_var_db=_number(values["shadow_var_db"], "shadow_var_db"),
        k_sweep=_ints(values["k_sweep"], "k_sweep"),
        l_sweep=_ints(values["l_sweep"], "l_sweep"),
        trials=_number(values["trials"], "trials", int),
        seed=_number(values["seed"], "seed", int),
        objective=objective,
        ell_d=opt("planner.ell_d"),
        ell_u=opt("planner.ell_u"),
        phi=_number(values["planner.phi"], "planner.phi"),
        estimation_noise_var=_number(values["estimation_noise_var"], "estimation_noise_var"),
    )
