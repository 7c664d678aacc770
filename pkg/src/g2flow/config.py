"""Run configuration: a TOML file plus ``section.key=value`` overrides.

Relative paths (outputs, ``file`` inputs) resolve against the working directory.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .flow import INTEGRATORS, FlowConfig, Monitor
from .lattice import LatticeSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


BACKGROUND_KINDS = ("torsion_free", "sigma_u", "file")
INIT_KINDS = ("constant", "winding", "perturbation", "hedgehog", "file")

DEFAULTS = {
    "lattice": {"active_axes": [1], "n": 64, "L": 1.0},
    "background": {"kind": "torsion_free"},
    "init": {"kind": "constant"},
    "flow": {"integrator": "rk4", "cfl_factor": 0.25, "t_end": 0.01, "renormalize_stride": 1,
             "blowup_factor": 1000.0},
    "diagnostics": {"stride": 10, "monotonicity": {"enabled": False}},
    "output": {"csv": "diagnostics.csv", "checkpoint_stride": 0},
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    lattice: LatticeSpec
    background: dict
    init: dict
    flow: FlowConfig
    t_end: float
    stride: int
    monitor: Monitor | None
    csv: Path | None
    checkpoint: Path | None
    checkpoint_stride: int
    base_dir: Path


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return key.strip().split("."), parsed


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for text in overrides or ():
        path, value = parse_override(text)
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r}: {part!r} is not a table")
        node[path[-1]] = value
    return raw


def _num(section: dict, key: str, where: str, positive=True, integer=False, allow_zero=False):
    if key not in section:
        raise ConfigError(f"{where}.{key} is required")
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    if positive and not (v > 0 or (allow_zero and v == 0)):
        raise ConfigError(f"{where}.{key} must be {'non-negative' if allow_zero else 'positive'}, "
                          f"got {v!r}")
    return int(v) if integer else float(v)


def _axis(section: dict, where: str, spec: LatticeSpec) -> int:
    a = _num(section, "axis", where, integer=True)
    if a not in spec.active_axes:
        raise ConfigError(f"{where}.axis = {a} is not an active axis {list(spec.active_axes)}")
    return a


def build(raw: dict, base_dir: Path | None = None) -> RunConfig:
    raw = _merge(DEFAULTS, raw)
    base_dir = Path(base_dir or ".")
    lat = raw["lattice"]
    try:
        spec = LatticeSpec(tuple(lat["active_axes"]), _num(lat, "n", "lattice", integer=True),
                           _num(lat, "L", "lattice"), bool(lat.get("allow_many_axes", False)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"lattice: {exc}") from None

    bg = dict(raw["background"])
    if bg.get("kind") not in BACKGROUND_KINDS:
        raise ConfigError(f"background.kind must be one of {BACKGROUND_KINDS}, got {bg.get('kind')!r}")
    if bg["kind"] == "sigma_u":
        bg["axis"] = _axis(bg, "background", spec)
        bg["twists"] = _num(bg, "twists", "background", integer=True, positive=False)
    elif bg["kind"] == "file":
        if "path" not in bg:
            raise ConfigError("background.path is required for kind = 'file'")

    init = dict(raw["init"])
    kind = init.get("kind")
    if kind not in INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {INIT_KINDS}, got {kind!r}")
    if kind == "winding":
        init["axis"] = _axis(init, "init", spec)
        init["twists"] = _num(init, "twists", "init", integer=True, positive=False)
    elif kind == "perturbation":
        init["amplitude"] = _num(init, "amplitude", "init", allow_zero=True)
        init["seed"] = _num(init, "seed", "init", integer=True, positive=True, allow_zero=True)
    elif kind == "hedgehog":
        init["radius"] = _num(init, "radius", "init")
        init["twists"] = _num({"twists": init.get("twists", 1)}, "twists", "init", integer=True)
    elif kind == "file" and "path" not in init:
        raise ConfigError("init.path is required for kind = 'file'")

    fl = raw["flow"]
    if fl.get("integrator") not in INTEGRATORS:
        raise ConfigError(f"flow.integrator must be one of {INTEGRATORS}, got {fl.get('integrator')!r}")
    dt = _num(fl, "dt", "flow") if "dt" in fl else None
    try:
        flow = FlowConfig(integrator=fl["integrator"], cfl_factor=_num(fl, "cfl_factor", "flow"),
                          dt=dt, renormalize_stride=_num(fl, "renormalize_stride", "flow",
                                                         integer=True),
                          blowup_factor=_num(fl, "blowup_factor", "flow"))
    except ValueError as exc:
        raise ConfigError(f"flow: {exc}") from None
    if dt is not None and dt > flow.ceiling(spec) * (1 + 1e-12):
        raise ConfigError(f"flow.dt = {dt} exceeds the stability ceiling cfl_factor*h^2/(2d) = "
                          f"{flow.ceiling(spec)}")
    t_end = _num(fl, "t_end", "flow", allow_zero=True)

    dg = raw["diagnostics"]
    stride = _num(dg, "stride", "diagnostics", integer=True)
    mono = dg.get("monotonicity", {}) or {}
    monitor = None
    if mono.get("enabled", False):
        t0 = _num(mono, "t0", "diagnostics.monotonicity")
        x0 = mono.get("x0", [spec.L / 2] * spec.d)
        if (not isinstance(x0, list) or len(x0) != spec.d
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in x0)):
            raise ConfigError(f"diagnostics.monotonicity.x0 must list {spec.d} coordinates")
        spread = _num(mono, "spread", "diagnostics.monotonicity", allow_zero=True) \
            if "spread" in mono else 0.0
        monitor = Monitor(tuple(float(c) for c in x0), t0, spread)

    out = raw["output"]
    csv = out.get("csv")
    ckpt = out.get("checkpoint")
    ck_stride = _num(out, "checkpoint_stride", "output", integer=True, allow_zero=True)
    return RunConfig(raw=raw, lattice=spec, background=bg, init=init, flow=flow, t_end=t_end,
                     stride=stride, monitor=monitor,
                     csv=Path(csv) if csv else None,
                     checkpoint=Path(ckpt) if ckpt else None,
                     checkpoint_stride=ck_stride, base_dir=base_dir)


def load_config(path, overrides=()) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return build(apply_overrides(raw, overrides), path.parent)
