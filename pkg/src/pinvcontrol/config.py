"""JSON run configuration with field-level validation.

A configuration file is a JSON object; every section is optional and falls
back to the defaults below::

    {
      "name": "pinv-deterministic",
      "system": "deterministic",            # or "langevin"
      "model": {"m": 1, "omega0": 1, "gamma0": 0.1, "omega_c": 10, "kT": 1},
      "grid": {"tau": 15, "N": 1500},
      "initial_state": [0.7071, 0.7071],    # deterministic system only
      "basis": {"n": 12, "t0": 0.5, "eta": 2, "normalize": true},
      "ensemble": {"M": 1000, "base_seed": 0},
      "optimizer": {"algorithm": "quasi_newton", "epsilon": 1e-6,
                    "max_iters": 500, "strategy": "PINV"},
      "initial_guess": "zero",              # or {"csv": "u0.csv"}
      "post_truncate": false,
      "warm_start": null,                   # or {"max_iters": 100, ...}
      "spectrogram": {"window_length": null, "hop": null, "window": "hann"},
      "output_dir": "out"
    }

``basis`` may instead be ``{"csv": "basis.csv"}`` or ``null`` (only for the
``NONE`` strategy). ``optimizer.strategy`` may be a list of strategies, in
which case all of them are run from the same start and compared. Relative
input paths are resolved against the directory of the configuration file.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .optimize import Strategy


@dataclass(frozen=True)
class ModelSection:
    m: float = 1.0
    omega0: float = 1.0
    gamma0: float = 0.1
    omega_c: float = 10.0
    kT: float = 1.0

    def check(self, where):
        _positive(where, "m", self.m)
        _positive(where, "omega0", self.omega0)
        _positive(where, "omega_c", self.omega_c)
        _nonnegative(where, "gamma0", self.gamma0)
        _nonnegative(where, "kT", self.kT)


@dataclass(frozen=True)
class GridSection:
    tau: float = 15.0
    N: int = 1500

    def check(self, where):
        _positive(where, "tau", self.tau)
        _integer(where, "N", self.N, minimum=2)


@dataclass(frozen=True)
class BasisSection:
    n: int = 12
    t0: float = 0.5
    eta: float = 2.0
    normalize: bool = True
    csv: str | None = None

    def check(self, where):
        if self.csv is not None:
            return
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 3 or self.n % 3:
            raise ConfigError(f"{where}.n", f"must be a positive multiple of 3, got {self.n!r}")
        _positive(where, "t0", self.t0)
        _positive(where, "eta", self.eta)


@dataclass(frozen=True)
class EnsembleSection:
    M: int = 1000
    base_seed: int = 0

    def check(self, where):
        _integer(where, "M", self.M, minimum=1)
        _integer(where, "base_seed", self.base_seed, minimum=0)


@dataclass(frozen=True)
class OptimizerSection:
    algorithm: str = "quasi_newton"
    epsilon: float = 1e-6
    max_iters: int = 500
    strategy: str | list = "PINV"
    memory: int = 10
    initial_step: float = 1.0

    def check(self, where):
        if self.algorithm not in ("steepest_descent", "quasi_newton"):
            raise ConfigError(f"{where}.algorithm",
                              f"must be 'steepest_descent' or 'quasi_newton', got {self.algorithm!r}")
        _positive(where, "epsilon", self.epsilon)
        _integer(where, "max_iters", self.max_iters, minimum=1)
        _integer(where, "memory", self.memory, minimum=1)
        _positive(where, "initial_step", self.initial_step)
        names = self.strategies
        if not names:
            raise ConfigError(f"{where}.strategy", "needs at least one strategy")
        for name in names:
            try:
                Strategy(name)
            except ValueError:
                raise ConfigError(f"{where}.strategy",
                                  f"unknown strategy {name!r}; choose from PINV, COEFF, ORTHO, NONE") from None
        if len(set(names)) != len(names):
            raise ConfigError(f"{where}.strategy", "strategies must be distinct")

    @property
    def strategies(self):
        return [self.strategy] if isinstance(self.strategy, str) else list(self.strategy)


@dataclass(frozen=True)
class WarmStartSection:
    algorithm: str = "quasi_newton"
    epsilon: float = 1e-6
    max_iters: int = 100
    memory: int = 10

    def check(self, where):
        OptimizerSection(self.algorithm, self.epsilon, self.max_iters, "NONE", self.memory).check(where)


@dataclass(frozen=True)
class SpectrogramSection:
    window_length: int | None = None
    hop: int | None = None
    window: str = "hann"

    def check(self, where):
        if self.window_length is not None:
            _integer(where, "window_length", self.window_length, minimum=2)
        if self.hop is not None:
            _integer(where, "hop", self.hop, minimum=1)
        if self.window not in ("hann", "rect"):
            raise ConfigError(f"{where}.window", f"must be 'hann' or 'rect', got {self.window!r}")


_SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "basis": BasisSection,
    "ensemble": EnsembleSection,
    "optimizer": OptimizerSection,
    "spectrogram": SpectrogramSection,
    "warm_start": WarmStartSection,
}


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    system: str = "deterministic"
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    initial_state: tuple = (2**-0.5, 2**-0.5)
    basis: BasisSection | None = field(default_factory=BasisSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    initial_guess: str | dict = "zero"
    post_truncate: bool = False
    warm_start: WarmStartSection | None = None
    spectrogram: SpectrogramSection = field(default_factory=SpectrogramSection)
    output_dir: str = "out"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        self.check()

    def check(self):
        if self.system not in ("deterministic", "langevin"):
            raise ConfigError("system", f"must be 'deterministic' or 'langevin', got {self.system!r}")
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("name", "must be a non-empty string")
        for key in _SECTIONS:
            section = getattr(self, key)
            if section is not None:
                section.check(key)
        if len(self.initial_state) != 2 or not all(_is_real(v) for v in self.initial_state):
            raise ConfigError("initial_state", "must be a pair of numbers [q, p]")
        strategies = self.optimizer.strategies
        if self.basis is None and any(s != "NONE" for s in strategies):
            raise ConfigError("basis", "a basis is required unless optimizer.strategy is NONE")
        if self.basis is not None and self.basis.csv is None:
            if self.basis.t0 >= self.grid.tau / 2:
                raise ConfigError("basis.t0", f"must be below tau / 2 = {self.grid.tau / 2}")
        if self.initial_guess != "zero":
            if not (isinstance(self.initial_guess, dict) and set(self.initial_guess) == {"csv"}):
                raise ConfigError("initial_guess", "must be 'zero' or {\"csv\": path}")
        for where, ref in (("basis.csv", self.basis and self.basis.csv),
                           ("initial_guess.csv", isinstance(self.initial_guess, dict) and self.initial_guess["csv"])):
            if ref and not self.resolve(ref).is_file():
                raise ConfigError(where, f"file not found: {self.resolve(ref)}")
        if not isinstance(self.post_truncate, bool):
            raise ConfigError("post_truncate", "must be true or false")
        if self.post_truncate and (strategies != ["NONE"] or self.basis is None):
            raise ConfigError("post_truncate", "needs optimizer.strategy NONE and a basis")
        if self.warm_start is not None and self.basis is None:
            raise ConfigError("warm_start", "needs a basis to project onto")
        if not isinstance(self.output_dir, str):
            raise ConfigError("output_dir", "must be a string")

    def resolve(self, path):
        """Input path relative to the directory of the configuration file."""
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "base_dir":
                continue
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                value = dataclasses.asdict(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def from_dict(data, base_dir="."):
    """Build a :class:`RunConfig`; problems raise :class:`ConfigError` naming the field."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"base_dir"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    kwargs = {"base_dir": str(base_dir)}
    for key, value in data.items():
        if key in _SECTIONS:
            if value is None and key in ("basis", "warm_start"):
                kwargs[key] = None
                continue
            kwargs[key] = _section(_SECTIONS[key], value, key)
        elif key == "initial_state":
            if not isinstance(value, list):
                raise ConfigError(key, "must be a pair of numbers [q, p]")
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def load(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"configuration file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from None
    return from_dict(data, base_dir=path.resolve().parent)


def dumps(config):
    return json.dumps(config.to_dict(), indent=2, sort_keys=False) + "\n"


def _section(cls, value, where):
    if not isinstance(value, dict):
        raise ConfigError(where, "must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, v in value.items():
        if key not in names:
            raise ConfigError(f"{where}.{key}", "unknown configuration key")
        default = names[key].default
        if isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError(f"{where}.{key}", f"must be true or false, got {v!r}")
        if isinstance(default, float) and not _is_real(v):
            raise ConfigError(f"{where}.{key}", f"must be a number, got {v!r}")
    return cls(**value)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(where, name, value):
    if not _is_real(value) or value <= 0:
        raise ConfigError(f"{where}.{name}", f"must be a positive number, got {value!r}")


def _nonnegative(where, name, value):
    if not _is_real(value) or value < 0:
        raise ConfigError(f"{where}.{name}", f"must be a non-negative number, got {value!r}")


def _integer(where, name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}.{name}", f"must be an integer >= {minimum}, got {value!r}")
