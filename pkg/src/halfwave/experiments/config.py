"""Experiment configuration: INI files with strict section/key schemas.

Sections: [grid], [potential], [state], [cutoffs], [time], [tolerances],
plus an optional [run] block (seed, label, threads).  Unknown sections or
keys are errors, as are violated side conditions (R > 1, a > R, b < 1,
b/R < 1, epsilon > 0).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration file or parameter set (CLI exit code 2)."""


_SCHEMA: dict[str, dict[str, type]] = {
    "grid": {"n_points": int, "spacing": float},
    "potential": {"family": str, "gamma": float, "beta": float},
    "state": {
        "center": float, "width": float, "momentum": float,
        "window_lo": float, "window_hi": float, "window_margin": float,
        "epsilon": float,
    },
    "cutoffs": {
        "r_scale": float, "a_out": float, "b_in": float,
        "width": float, "shell_delta": float,
        "shell_min": int, "shell_max": int, "mourre_epsilon": float,
    },
    "time": {"t_start": float, "t_end": float, "ratio": float, "dt": float},
    "tolerances": {
        "filter_tol": float, "boundary_tol": float, "mellin_mass_tol": float,
        "decay_target": float, "tail_factor": float, "envelope_ratio": float,
    },
    "run": {"seed": int, "label": str, "threads": int},
}


@dataclass
class ExperimentConfig:
    """Validated parameter set for all experiment entry points."""

    # grid
    n_points: int = 8192
    spacing: float = 0.25
    # potential
    family: str = "soft_decay"
    gamma: float = -0.3
    beta: float = 3.0
    # state
    center: float = 100.0
    width: float = 10.0
    momentum: float = 0.3
    window_lo: float = 0.1
    window_hi: float = 0.5
    window_margin: float = 0.1
    epsilon: float = 0.5
    # cutoffs
    r_scale: float = 2.0       # R in the A-observables, > 1
    a_out: float = 2.5         # outgoing position cutoff, > R
    b_in: float = 0.5          # incoming position cutoff, < 1
    width_rel: float = 0.25    # relative smoothing width of the cutoffs
    shell_delta: float = 0.05
    shell_min: int = 2
    shell_max: int = 3
    mourre_epsilon: float = 0.6
    # time
    t_start: float = 1.0
    t_end: float = 512.0
    ratio: float = 2.0 ** (1.0 / 8.0)
    dt: float = 0.05
    # tolerances
    filter_tol: float = 1e-6
    boundary_tol: float = 1e-6
    mellin_mass_tol: float = 1e-5
    decay_target: float = 1e-3
    tail_factor: float = 2.0
    envelope_ratio: float = 8.0
    # run
    seed: int = 0
    label: str = "run"
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_points < 8:
            raise ConfigError("grid.n_points must be >= 8")
        if self.spacing <= 0:
            raise ConfigError("grid.spacing must be positive")
        if self.family not in ("zero", "soft_decay"):
            raise ConfigError(f"unknown potential family {self.family!r}")
        if self.family == "soft_decay" and self.beta <= 2.0:
            raise ConfigError("soft_decay potential requires beta > 2")
        if not (self.r_scale > 1.0):
            raise ConfigError(f"cutoffs.r_scale must exceed 1, got {self.r_scale}")
        if not (self.a_out > self.r_scale):
            raise ConfigError(
                f"cutoffs.a_out ({self.a_out}) must exceed r_scale ({self.r_scale})"
            )
        if not (self.b_in < 1.0):
            raise ConfigError(f"cutoffs.b_in must be < 1, got {self.b_in}")
        if not (self.b_in / self.r_scale < 1.0):
            raise ConfigError("localization lemma requires b_in / r_scale < 1")
        if not (0 < self.width_rel < 1.0):
            raise ConfigError("cutoffs.width must lie in (0, 1)")
        if not (0 < self.shell_delta < 1.0 / 3.0):
            raise ConfigError("cutoffs.shell_delta must lie in (0, 1/3)")
        if not (0 <= self.shell_min <= self.shell_max):
            raise ConfigError("cutoffs shell range must satisfy 0 <= min <= max")
        if not (self.epsilon > 0):
            raise ConfigError("state.epsilon must be positive")
        if not (0 < self.mourre_epsilon < 1):
            raise ConfigError("cutoffs.mourre_epsilon must lie in (0, 1)")
        if not (0 < self.window_lo < self.window_hi):
            raise ConfigError("state window must satisfy 0 < lo < hi")
        if not (self.t_start >= 1.0 and self.t_end > self.t_start):
            raise ConfigError("time range must satisfy 1 <= t_start < t_end")
        if not (self.ratio > 1.0):
            raise ConfigError("time.ratio must exceed 1")
        if not (0 < self.dt <= 0.1):
            raise ConfigError("time.dt must lie in (0, 0.1]")

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def shells(self) -> list[int]:
        return list(range(self.shell_min, self.shell_max + 1))


_KEY_MAP = {
    ("grid", "n_points"): "n_points",
    ("grid", "spacing"): "spacing",
    ("potential", "family"): "family",
    ("potential", "gamma"): "gamma",
    ("potential", "beta"): "beta",
    ("state", "center"): "center",
    ("state", "width"): "width",
    ("state", "momentum"): "momentum",
    ("state", "window_lo"): "window_lo",
    ("state", "window_hi"): "window_hi",
    ("state", "window_margin"): "window_margin",
    ("state", "epsilon"): "epsilon",
    ("cutoffs", "r_scale"): "r_scale",
    ("cutoffs", "a_out"): "a_out",
    ("cutoffs", "b_in"): "b_in",
    ("cutoffs", "width"): "width_rel",
    ("cutoffs", "shell_delta"): "shell_delta",
    ("cutoffs", "shell_min"): "shell_min",
    ("cutoffs", "shell_max"): "shell_max",
    ("cutoffs", "mourre_epsilon"): "mourre_epsilon",
    ("time", "t_start"): "t_start",
    ("time", "t_end"): "t_end",
    ("time", "ratio"): "ratio",
    ("time", "dt"): "dt",
    ("tolerances", "filter_tol"): "filter_tol",
    ("tolerances", "boundary_tol"): "boundary_tol",
    ("tolerances", "mellin_mass_tol"): "mellin_mass_tol",
    ("tolerances", "decay_target"): "decay_target",
    ("tolerances", "tail_factor"): "tail_factor",
    ("tolerances", "envelope_ratio"): "envelope_ratio",
    ("run", "seed"): "seed",
    ("run", "label"): "label",
    ("run", "threads"): "threads",
}


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate an INI config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    kwargs: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            typ = _SCHEMA[section][key]
            try:
                value = raw if typ is str else typ(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
            kwargs[_KEY_MAP[(section, key)]] = value
    if overrides:
        kwargs.update(overrides)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


DEFAULT_CONFIG_TEXT = """\
[grid]
n_points = 8192
spacing = 0.25

[potential]
family = soft_decay
gamma = -0.3
beta = 3.0

[state]
center = 100.0
width = 10.0
momentum = 0.3
window_lo = 0.1
window_hi = 0.5

[cutoffs]
r_scale = 2.0
a_out = 2.5
b_in = 0.5
shell_min = 2
shell_max = 3

[time]
t_end = 512.0
dt = 0.05

[tolerances]
filter_tol = 1e-6
"""
