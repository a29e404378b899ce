"""Experiment configuration: flat ``section.key = value`` text files.

Example::

    # grid
    grid.M = 64
    grid.L = 16*pi
    imethod.N_list = 4, 8, 16, 32
    init.preset = gaussian
    init.mass_fraction = 0.5

Lists are comma separated.  Floats may be written as multiples of ``pi``.
Keys under ``init.`` other than ``preset`` and ``seed`` are passed to the
preset as keyword parameters.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

log = logging.getLogger(__name__)

_PI = re.compile(r"^\s*([-+0-9.eE]*)\s*\*?\s*pi\s*(?:/\s*([0-9.eE+-]+))?\s*$")


class ConfigError(ValueError):
    pass


def parse_scalar(text: str) -> Any:
    """``int``, ``float``, ``bool``, ``k*pi[/d]`` or a bare string."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    m = _PI.match(low)
    if m:
        coef = m.group(1)
        value = (float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)) * np.pi
        return value / float(m.group(2)) if m.group(2) else value
    return t


def parse_value(text: str) -> Any:
    if "," in text:
        return [parse_scalar(part) for part in text.split(",") if part.strip()]
    return parse_scalar(text)


def parse_text(text: str) -> dict[str, Any]:
    """Parse config text into a flat ``{dotted.key: value}`` dict."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} needs a section prefix")
        out[key] = parse_value(value)
    return out


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a run.  Defaults reproduce the conservation scenario."""

    M: int = 64
    L: float = 16 * np.pi
    dt: float = 1e-3
    T: float = 1.0
    ledger_every: int = 100
    delta: float = 0.1
    mode: str = "full"
    N_list: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    s: float = 0.75
    preset: str = "gaussian"
    seed: int = 0
    ensemble: int = 1
    init_params: dict = field(default_factory=dict)
    checks: dict = field(default_factory=lambda: {"assert": True})
    output: str = "out"
    snapshot_every: int = 0
    workers: int = 1
    local_lambdas: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    local_cap: float = 1.0

    _KEYS = {
        "grid.M": "M", "grid.L": "L",
        "time.dt": "dt", "time.T": "T", "time.ledger_every": "ledger_every", "time.delta": "delta",
        "time.mode": "mode",
        "imethod.N_list": "N_list", "imethod.s": "s",
        "init.preset": "preset", "init.seed": "seed", "init.ensemble": "ensemble",
        "output.directory": "output", "output.snapshot_every": "snapshot_every",
        "runtime.workers": "workers",
        "local.lambdas": "local_lambdas", "local.cap": "local_cap",
    }

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 8 or self.M % 2:
            raise ConfigError("grid.M must be an even integer >= 8")
        for name in ("L", "dt", "T", "delta", "local_cap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.5 < self.s < 1.0:
            raise ConfigError(f"imethod.s must lie in (1/2, 1), got {self.s}")
        if not self.N_list or any(not float(N) > 0 for N in self.N_list):
            raise ConfigError("imethod.N_list needs positive entries")
        if self.ensemble < 1 or self.workers < 1:
            raise ConfigError("init.ensemble and runtime.workers must be >= 1")
        nyq = np.pi * self.M / self.L
        for N in self.N_list:
            if N > nyq:
                log.warning("N = %g exceeds the grid Nyquist frequency %.4g; I is the identity there", N, nyq)

    @property
    def nyquist(self) -> float:
        return float(np.pi * self.M / self.L)

    def vacuous_N(self) -> list[float]:
        return [float(N) for N in self.N_list if N > self.nyquist]

    def check(self, name: str, default: bool = True) -> bool:
        """Whether assertions for ``name`` are enabled (``checks.assert`` is the master switch)."""
        if not self.checks.get("assert", True):
            return False
        return bool(self.checks.get(name, default))

    @classmethod
    def from_mapping(cls, flat: dict[str, Any]) -> "ExperimentConfig":
        kwargs: dict[str, Any] = {}
        init_params: dict[str, Any] = {}
        checks: dict[str, Any] = {"assert": True}
        for key, value in flat.items():
            if key in cls._KEYS:
                kwargs[cls._KEYS[key]] = value
            elif key.startswith("init."):
                init_params[key[5:]] = value
            elif key.startswith("checks."):
                checks[key[7:]] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        for name in ("N_list", "local_lambdas"):
            if name in kwargs:
                kwargs[name] = tuple(float(v) for v in _as_list(kwargs[name]))
        for name in ("M", "ledger_every", "seed", "ensemble", "workers", "snapshot_every"):
            if name in kwargs:
                if not float(kwargs[name]).is_integer():
                    raise ConfigError(f"{name} must be an integer")
                kwargs[name] = int(kwargs[name])
        for name in ("L", "dt", "T", "delta", "s", "local_cap"):
            if name in kwargs:
                kwargs[name] = float(kwargs[name])
        for name in ("preset", "mode", "output"):
            if name in kwargs:
                kwargs[name] = str(kwargs[name])
        return cls(init_params=init_params, checks=checks, **kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_text(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def with_updates(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        """Serialise back to the flat format (round-trips through :meth:`from_text`)."""
        lines = []
        for key, attr in self._KEYS.items():
            value = getattr(self, attr)
            if isinstance(value, tuple):
                value = ", ".join(repr(float(v)) for v in value)
                if "," not in value:
                    value += ","
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        for k, v in sorted(self.init_params.items()):
            lines.append(f"init.{k} = {v!r}" if isinstance(v, float) else f"init.{k} = {v}")
        for k, v in sorted(self.checks.items()):
            lines.append(f"checks.{k} = {v}")
        return "\n".join(lines) + "\n"


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))
