"""JSON run configuration with sections ``network``, ``train`` and ``sweep``.

Unknown keys are rejected. Every validation error names its field as
``section.key`` so a typo in a hyperparameter is caught before any work runs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .core import Family, Formulation, InteractionSpec, NetworkConfig, Precision
from .experiments import (
    COARSE_INVERSE_TEMPERATURES,
    COARSE_LEARNING_RATES,
    DEFAULT_MAX_SWEEPS,
    FINE_INVERSE_TEMPERATURES,
    FINE_LEARNING_RATES,
    PAPER_VERTICES,
    SweepGrid,
)
from .training import STEP_MODES, TrainConfig

SEED_ENV = "DAM_LAB_SEED"


class ConfigError(ValueError):
    """A config problem; the message starts with the offending field."""


_REAL = "real"
_INT = "integer"
_STR = "string"
_REALS = "list of reals"
_INTS = "list of integers"

NETWORK_KEYS = {
    "formulation": (_STR, "modified"),
    "dim": (_INT, 100),
    "family": (_STR, "polynomial"),
    "vertex": (_INT, 2),
    "leak": (_REAL, 0.01),
    "temperature": (_REAL, 1.0),
    "precision": (_STR, "double"),
}
TRAIN_KEYS = {
    "initial_lr": (_REAL, None),
    "lr_decay": (_REAL, 0.999),
    "momentum": (_REAL, 0.0),
    "error_exponent": (_INT, 1),
    "epochs": (_INT, 500),
    "memory_count": (_INT, None),
    "init_scale": (_REAL, 0.1),
    "seed": (_INT, 0),
    "step_normalization": (_STR, "row_max"),
    "patterns": (_INT, 20),
    "data_seed": (_INT, None),
}
SWEEP_KEYS = {
    "grid": (_STR, "coarse"),
    "vertices": (_INTS, list(PAPER_VERTICES)),
    "learning_rates": (_REALS, None),
    "inverse_temperatures": (_REALS, None),
    "repeats": (_INT, 5),
    "base_seed": (_INT, 0),
    "patterns": (_INT, 20),
    "max_sweeps": (_INT, DEFAULT_MAX_SWEEPS),
}
SECTIONS = {"network": NETWORK_KEYS, "train": TRAIN_KEYS, "sweep": SWEEP_KEYS}
GRIDS = ("coarse", "fine")


def _check_type(path: str, kind: str, value):
    def is_int(v):
        return isinstance(v, int) and not isinstance(v, bool)

    def is_real(v):
        return (is_int(v) or isinstance(v, float)) and math.isfinite(v)

    ok = {
        _REAL: is_real,
        _INT: is_int,
        _STR: lambda v: isinstance(v, str),
        _REALS: lambda v: isinstance(v, list) and all(is_real(x) for x in v),
        _INTS: lambda v: isinstance(v, list) and all(is_int(x) for x in v),
    }[kind](value)
    if not ok:
        raise ConfigError(f"{path} must be a finite {kind}, got {json.dumps(value)}")
    if kind == _REAL:
        return float(value)
    if kind == _REALS:
        return [float(x) for x in value]
    return value


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    schema = SECTIONS[name]
    for key in data:
        if key not in schema:
            raise ConfigError(f"{name}.{key} is not a known setting")
    out = {}
    for key, (kind, default) in schema.items():
        if key in data and data[key] is not None:
            out[key] = _check_type(f"{name}.{key}", kind, data[key])
        else:
            out[key] = default
    return out


def _choice(path: str, value: str, options):
    if value not in options:
        raise ConfigError(f"{path} must be one of {list(options)}, got {value!r}")
    return value


def _wrap(section: str, err: ValueError) -> ConfigError:
    # constructor messages start with the field name
    return ConfigError(f"{section}.{err}")


@dataclass
class RunConfig:
    """Parsed but not yet resolved config; ``raw`` is the document as given."""

    network: Dict[str, Any]
    train: Dict[str, Any]
    sweep: Dict[str, Any]
    raw: Dict[str, Any] = field(default_factory=dict)
    path: Optional[str] = None

    # -- resolution --------------------------------------------------------
    def network_config(self) -> NetworkConfig:
        n = self.network
        _choice("network.formulation", n["formulation"], [f.value for f in Formulation])
        _choice("network.family", n["family"], [f.value for f in Family])
        _choice("network.precision", n["precision"], [p.value for p in Precision])
        try:
            spec = InteractionSpec(n["family"], n["vertex"], n["leak"])
        except ValueError as e:
            raise _wrap("network", e) from None
        try:
            return NetworkConfig(n["formulation"], n["dim"], spec, n["temperature"],
                                 n["precision"])
        except ValueError as e:
            raise _wrap("network", e) from None

    def train_config(self, seed: Optional[int] = None, need_lr: bool = True) -> TrainConfig:
        t = dict(self.train)
        _choice("train.step_normalization", t["step_normalization"], STEP_MODES)
        if t["initial_lr"] is None:
            if need_lr:
                raise ConfigError("train.initial_lr is required")
            t["initial_lr"] = 1.0
        if seed is not None:
            t["seed"] = seed
        for key in ("patterns", "data_seed"):
            t.pop(key)
        try:
            return TrainConfig(**t)
        except ValueError as e:
            raise _wrap("train", e) from None

    def train_overrides(self) -> Dict[str, Any]:
        """Training settings a sweep applies to every cell (lr and seed vary)."""
        base = self.train_config(need_lr=False)
        return {k: getattr(base, k) for k in
                ("lr_decay", "momentum", "error_exponent", "epochs", "memory_count",
                 "init_scale", "step_normalization")}

    @property
    def patterns(self) -> int:
        p = self.train["patterns"]
        if p < 1:
            raise ConfigError(f"train.patterns must be >= 1, got {p}")
        return p

    def data_seed(self, seed: Optional[int] = None) -> int:
        if self.train["data_seed"] is not None:
            return self.train["data_seed"]
        return self.train["seed"] if seed is None else seed

    def sweep_grid(self, base_seed: Optional[int] = None) -> SweepGrid:
        s = self.sweep
        net = self.network_config()
        grid = _choice("sweep.grid", s["grid"], GRIDS)
        lrs, its = s["learning_rates"], s["inverse_temperatures"]
        # explicit lists override the named grid axis by axis
        if grid == "coarse":
            lrs = list(COARSE_LEARNING_RATES) if lrs is None else lrs
            its = list(COARSE_INVERSE_TEMPERATURES) if its is None else its
        else:
            lrs = list(FINE_LEARNING_RATES) if lrs is None else lrs
            its = list(FINE_INVERSE_TEMPERATURES[net.formulation]) if its is None else its
        for key, values in (("learning_rates", lrs), ("inverse_temperatures", its),
                            ("vertices", s["vertices"])):
            if not values:
                raise ConfigError(f"sweep.{key} must be a non-empty list")
        for key, values in (("learning_rates", lrs), ("inverse_temperatures", its)):
            if any(v <= 0 for v in values):
                raise ConfigError(f"sweep.{key} must all be > 0")
        for key in ("repeats", "patterns", "max_sweeps"):
            if s[key] < 1:
                raise ConfigError(f"sweep.{key} must be >= 1, got {s[key]}")
        if net.interaction.family is not Family.EXPONENTIAL and any(v < 2 for v in s["vertices"]):
            bad = [v for v in s["vertices"] if v < 2]
            if len(bad) == len(s["vertices"]):
                raise ConfigError("sweep.vertices has no value >= 2")
        try:
            return SweepGrid(
                formulation=net.formulation, family=net.interaction.family,
                vertices=tuple(s["vertices"]), learning_rates=tuple(lrs),
                inverse_temperatures=tuple(its), repeats=s["repeats"],
                base_seed=s["base_seed"] if base_seed is None else base_seed,
                patterns=s["patterns"], dim=net.dim, leak=net.interaction.leak,
                precision=net.precision, max_sweeps=s["max_sweeps"],
                train=self.train_overrides(),
            )
        except ValueError as e:
            raise ConfigError(f"sweep: {e}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"{key} is not a known section (expected {sorted(SECTIONS)})")
    return RunConfig(_section(raw, "network"), _section(raw, "train"),
                     _section(raw, "sweep"), raw, source)


def load_config(path: str) -> RunConfig:
    """Read and parse ``path``; ``OSError`` propagates for the caller to map."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, path)


def resolve_seed(flag: Optional[int], config_value: int, env=None) -> int:
    """Seed precedence: command-line flag, then ``DAM_LAB_SEED``, then config."""
    if flag is not None:
        return flag
    env = os.environ if env is None else env
    value = env.get(SEED_ENV)
    if value not in (None, ""):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from None
    return config_value
