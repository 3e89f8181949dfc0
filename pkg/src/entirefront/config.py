"""Experiment configuration: YAML parsing with strict validation, defaults, round-trip."""

from __future__ import annotations

import hashlib
import re
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass, replace
from typing import Optional

import yaml

from .entire import EntireConfig, Wave
from .errors import ConfigError


class _StrictLoader(yaml.SafeLoader):
    """Safe loader that rejects duplicate keys and reads 1e-3 style numbers as floats."""


_FLOAT = re.compile(r"""^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?(?:[eE][-+]?[0-9]+)$""")
_StrictLoader.add_implicit_resolver("tag:yaml.org,2002:float", _FLOAT,
                                    list("-+0123456789"))


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            mark = key_node.start_mark
            raise ConfigError(f"duplicate field {key!r} at line {mark.line + 1}, "
                              f"column {mark.column + 1}", field=key, line=mark.line + 1,
                              column=mark.column + 1)
        seen[key] = True
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG,
                              _construct_mapping)


@dataclass(frozen=True)
class ModelBlock:
    kind: str
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SpectralBlock:
    lambda_max: float = 1e3
    tol: float = 1e-10


@dataclass(frozen=True)
class SisBlock:
    tol: float = 1e-12
    dt: float = 0.0025
    t0: float = -40.0
    t1: float = 40.0


@dataclass(frozen=True)
class FrontBlock:
    tol: float = 1e-8
    dxi: float = 0.02
    xi_max: float = 80.0
    speeds: tuple = ()


@dataclass(frozen=True)
class CheckerBlock:
    enabled: bool = True
    samples: int = 10_000
    k_max: int = 4
    rays: int = 1000


@dataclass(frozen=True)
class EntireBlock:
    waves: tuple = ()
    chi: tuple = ()
    h_last: float = 0.0
    mode: str = "auto"
    n_schedule: tuple = (2.0, 4.0, 6.0, 8.0)
    t_end: float = 15.0
    dx: float = 0.05
    dt: float = 1e-3
    snapshot_step: float = 0.5
    tol_order: float = 1e-8
    tol: float = 1e-3
    window: Optional[tuple] = None
    half_width: Optional[float] = None
    barrier: str = "scheme"

    def resolve(self, cooperative: bool, speed_factor=1.0) -> EntireConfig:
        mode = self.mode
        if mode == "auto":
            mode = "cooperative" if cooperative else "noncooperative"
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "barrier"}
        kw.update(mode=mode, waves=tuple(Wave(**w) for w in self.waves),
                  speed_factor=speed_factor)
        return EntireConfig(**kw)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelBlock
    name: str = "experiment"
    seed: int = 0
    output: str = "out"
    spectral: SpectralBlock = SpectralBlock()
    sis: SisBlock = SisBlock()
    front: FrontBlock = FrontBlock()
    checker: CheckerBlock = CheckerBlock()
    entire: Optional[EntireBlock] = None

    def speeds(self):
        cs = set(self.front.speeds)
        if self.entire is not None:
            cs.update(w["c"] for w, on in zip(self.entire.waves, self.entire.chi) if on)
        return sorted(float(c) for c in cs)

    def digest(self):
        return hashlib.sha256(serialize(self).encode()).hexdigest()


# ---------------------------------------------------------------------------
# schema-driven coercion

_BLOCKS = {"model": ModelBlock, "spectral": SpectralBlock, "sis": SisBlock,
           "front": FrontBlock, "checker": CheckerBlock, "entire": EntireBlock}

_FLOAT_LISTS = {("front", "speeds"), ("entire", "n_schedule"), ("entire", "window")}
_INT_LISTS = {("entire", "chi")}
_WAVE_KEYS = {"c": float, "h": float, "nu": int}


def _type_error(path, want, got):
    return ConfigError(f"field {path}: expected {want}, got {type(got).__name__} {got!r}",
                       field=path)


def _as_float(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _type_error(path, "a number", v)
    return float(v)


def _as_int(path, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise _type_error(path, "an integer", v)
    return v


def _coerce(path, default, v, key):
    if key in _FLOAT_LISTS:
        if v is None and default is None:
            return None
        if not isinstance(v, (list, tuple)):
            raise _type_error(path, "a list of numbers", v)
        return tuple(_as_float(f"{path}[{i}]", x) for i, x in enumerate(v))
    if key in _INT_LISTS:
        if not isinstance(v, (list, tuple)):
            raise _type_error(path, "a list of integers", v)
        return tuple(_as_int(f"{path}[{i}]", x) for i, x in enumerate(v))
    if key == ("entire", "waves"):
        if not isinstance(v, (list, tuple)):
            raise _type_error(path, "a list of waves", v)
        out = []
        for i, w in enumerate(v):
            if not isinstance(w, dict):
                raise _type_error(f"{path}[{i}]", "a mapping with c, h, nu", w)
            unknown = set(w) - set(_WAVE_KEYS)
            if unknown:
                raise ConfigError(f"unknown field {path}[{i}].{sorted(unknown)[0]}")
            if "c" not in w:
                raise ConfigError(f"field {path}[{i}].c is required")
            wave = {"c": _as_float(f"{path}[{i}].c", w["c"]),
                    "h": _as_float(f"{path}[{i}].h", w.get("h", 0.0)),
                    "nu": _as_int(f"{path}[{i}].nu", w.get("nu", 1))}
            out.append(wave)
        return tuple(out)
    if key == ("model", "parameters"):
        if not isinstance(v, dict):
            raise _type_error(path, "a mapping", v)
        return dict(v)
    if isinstance(default, bool):
        if not isinstance(v, bool):
            raise _type_error(path, "a boolean", v)
        return v
    if isinstance(default, int):
        return _as_int(path, v)
    if isinstance(default, float) or (default is None and key == ("entire", "half_width")):
        return None if v is None else _as_float(path, v)
    if isinstance(default, str):
        if not isinstance(v, str):
            raise _type_error(path, "a string", v)
        return v
    return v


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise _type_error(prefix, "a mapping", data)
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown field {prefix}.{sorted(unknown)[0]}",
                          field=f"{prefix}.{sorted(unknown)[0]}")
    kw = {}
    for name, f in known.items():
        if name not in data:
            continue
        if f.default is not MISSING:
            default = f.default
        elif f.default_factory is not MISSING:
            default = f.default_factory()
        else:
            default = ""
        kw[name] = _coerce(f"{prefix}.{name}", default, data[name], (prefix, name))
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{prefix}: {exc}") from None


def from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at top level")
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]}", field=sorted(unknown)[0])
    if "model" not in data:
        raise ConfigError("field model is required")
    kw = {}
    for key, value in data.items():
        if key in _BLOCKS:
            if key == "entire" and value is None:
                kw[key] = None
                continue
            kw[key] = _build(_BLOCKS[key], value, key)
        elif key == "seed":
            kw[key] = _as_int(key, value)
        else:
            if not isinstance(value, str):
                raise _type_error(key, "a string", value)
            kw[key] = value
    if "kind" not in data["model"]:
        raise ConfigError("field model.kind is required")
    return ExperimentConfig(**kw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse YAML text into a validated configuration with defaults filled."""
    try:
        data = yaml.load(text, Loader=_StrictLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"syntax error{where}: {exc.problem}",
                          line=mark.line + 1 if mark else None,
                          column=mark.column + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return from_dict(data)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _plain(obj):
    if is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def to_dict(config: ExperimentConfig) -> dict:
    return _plain(config)


def serialize(config: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None)


def with_overrides(config: ExperimentConfig, *, dx=None, dt=None, tol=None, schedule=None,
                   seed=None, output=None, tol_target="entire") -> ExperimentConfig:
    """Apply command-line overrides. ``tol`` goes to the block named by ``tol_target``."""
    cfg = config
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if output is not None:
        cfg = replace(cfg, output=output)
    ent = cfg.entire
    if ent is not None:
        if dx is not None:
            ent = replace(ent, dx=dx)
        if dt is not None:
            ent = replace(ent, dt=dt)
        if schedule is not None:
            ent = replace(ent, n_schedule=tuple(float(s) for s in schedule))
        cfg = replace(cfg, entire=ent)
    elif any(v is not None for v in (dx, dt, schedule)):
        raise ConfigError("--dx/--dt/--schedule need an entire block in the config")
    if tol is not None:
        block = getattr(cfg, tol_target)
        if block is None:
            raise ConfigError(f"--tol needs a {tol_target} block in the config")
        cfg = replace(cfg, **{tol_target: replace(block, tol=tol)})
    return cfg
