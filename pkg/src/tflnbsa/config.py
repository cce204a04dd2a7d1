"""Run configuration: YAML profiles with unit-suffixed keys and dotted overrides."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .geometry import CoupledPair, DeviceSpec, GridSpec, MaterialStack, RibWaveguide, SBendProfile
from .modesolver import SolverSettings

__all__ = ["ConfigError", "RunConfig", "load_config", "default_profile", "OUTPUT_ENV", "parse_override"]

OUTPUT_ENV = "TFLNBSA_OUTPUT_DIR"


class ConfigError(ValueError):
    """Malformed configuration; the message names the file position or field."""


def default_profile(name: str = "default") -> dict:
    text = resources.files("tflnbsa").joinpath("profiles", f"{name}.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _merge(base: dict, upd: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown field '{where}'")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"field '{where}' must be a mapping")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def parse_override(text: str) -> dict:
    """``a.b.c=value`` into a nested dict; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{key}': cannot parse value {raw!r}") from exc
    node: dict = {}
    cur = node
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override '{text}' has an empty key segment")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return node


def _load_yaml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{where}: {problem}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


@dataclass(frozen=True)
class RunConfig:
    device: DeviceSpec
    grid: GridSpec
    fiber_grid: GridSpec
    solver: SolverSettings
    table_gaps_nm: tuple
    table_cache: str | None
    sweeps: dict
    bands: dict
    output_dir: Path
    raw: dict


def _build(section: str, factory, kwargs: dict):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _num(d: dict, key: str, path: str) -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field '{path}.{key}' must be a number, got {v!r}")
    return float(v)


def from_dict(data: dict) -> RunConfig:
    d = data["device"]
    stack = _build("device.stack", MaterialStack, {k: _num(d["stack"], k, "device.stack") for k in d["stack"]})
    rib_kw = dict(d["rib"])
    for k in ("width_nm", "etch_depth_nm", "sidewall_angle_deg"):
        rib_kw[k] = _num(d["rib"], k, "device.rib")
    rib = _build("device.rib", RibWaveguide, rib_kw)
    gap = _num(d, "gap_nm", "device")
    pair = _build("device.gap_nm", CoupledPair, {"rib": rib, "gap_nm": gap})
    sb = d["sbend"]
    sbend = _build(
        "device.sbend",
        SBendProfile,
        {
            "start_separation_um": _num(sb, "start_separation_um", "device.sbend"),
            "end_gap_nm": gap,
            "bend_length_um": _num(sb, "bend_length_um", "device.sbend"),
            "samples": int(sb["samples"]),
        },
    )
    device = _build(
        "device",
        DeviceSpec,
        {
            "stack": stack,
            "pair": pair,
            "sbend": sbend,
            "coupling_length_um": _num(d, "coupling_length_um", "device"),
            "bend_transmission_te": _num(d, "bend_transmission_te", "device"),
            "bend_transmission_tm": _num(d, "bend_transmission_tm", "device"),
        },
    )
    grid = _build("grid", GridSpec, {k: _num(data["grid"], k, "grid") for k in data["grid"]})
    fgrid = _build("fiber_grid", GridSpec, {k: _num(data["fiber_grid"], k, "fiber_grid") for k in data["fiber_grid"]})
    s = data["solver"]
    solver = _build(
        "solver",
        SolverSettings,
        {
            "tol": _num(s, "tol", "solver"),
            "maxiter": int(s["maxiter"]),
            "residual_tol": _num(s, "residual_tol", "solver"),
            "extra_modes": int(s["extra_modes"]),
        },
    )
    gaps = data["table"]["gaps_nm"]
    if not isinstance(gaps, list) or len(gaps) < 2:
        raise ConfigError("field 'table.gaps_nm' must be a list of at least two gaps")
    out = os.environ.get(OUTPUT_ENV) or data["output_dir"]
    return RunConfig(
        device=device,
        grid=grid,
        fiber_grid=fgrid,
        solver=solver,
        table_gaps_nm=tuple(float(g) for g in gaps),
        table_cache=data["table"]["cache"],
        sweeps=data["sweeps"],
        bands=data["bands"],
        output_dir=Path(out),
        raw=data,
    )


def load_config(path=None, overrides=(), profile: str = "default") -> RunConfig:
    """Profile defaults, then the file at ``path``, then ``key.path=value`` overrides.

    The output directory can also be set with the ``TFLNBSA_OUTPUT_DIR``
    environment variable, which wins over the file.
    """
    try:
        data = default_profile(profile)
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown profile '{profile}'") from exc
    if path is not None:
        data = _merge(data, _load_yaml(Path(path)))
    for ov in overrides:
        data = _merge(data, parse_override(ov))
    return from_dict(data)
