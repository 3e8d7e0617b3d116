"""
Experiment configuration and user-population construction.

Config files are flat ``key = value`` text; ``#`` starts a comment and list
values are comma separated. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .model import FrameConfig, ReceiverKind, UserSet

__all__ = ["ExperimentConfig", "parse_config", "load_config", "build_population", "CALIBRATIONS"]

CALIBRATIONS = ("raw", "worst_user_0dB")


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    # frame
    num_symbols: int = 100
    num_subframes: int = 80
    bandwidth: float = 10e6
    frame_duration: float = 1e-3
    throughput_target: float = 1e4
    bandwidth_inefficiency: float = 1.25
    # population
    num_users: int = 100
    G0: float = 0.1
    alpha: float = 4.0
    R_min: float = 10.0
    R_max: float = 100.0
    energy_dB: float = 70.0
    energies_dB: tuple[float, ...] = ()
    calibration: str = "worst_user_0dB"
    calibration_reference_dB: float = 70.0
    # scheduler
    receiver: str = "zf"
    antennas: int = 64
    solver: str = "dp"
    zf_fallback: bool = False
    # sweeps
    energy_dB_sweep: tuple[float, ...] = _floats(range(50, 150, 10))
    antennas_sweep: tuple[int, ...] = tuple(2 ** k for k in range(5, 15))
    users_sweep: tuple[int, ...] = tuple(range(100, 1100, 100))
    # randomness
    seed: int = 0
    num_draws: int = 20
    num_realizations: int = 10_000
    # Monte Carlo grid
    mc_antennas: tuple[int, ...] = (16, 32, 64, 128, 256)
    mc_energy_dB: tuple[float, ...] = (0.0, 10.0, 20.0)
    mc_training_length: int = 10
    mc_group_size: int = 5
    output: str = "out"

    def __post_init__(self):
        if self.num_users < 1:
            raise ParameterError("num_users must be >= 1")
        if self.calibration not in CALIBRATIONS:
            raise ParameterError(f"calibration must be one of {CALIBRATIONS}, got {self.calibration!r}")
        ReceiverKind.parse(self.receiver)
        if self.solver not in ("lp", "dp"):
            raise ParameterError("solver must be 'lp' or 'dp'")
        if not (0 < self.R_min <= self.R_max):
            raise ParameterError("need 0 < R_min <= R_max")
        if self.energies_dB and len(self.energies_dB) != self.num_users:
            raise ParameterError("energies_dB must list one value per user")
        for name in ("energy_dB_sweep", "antennas_sweep", "users_sweep", "mc_antennas", "mc_energy_dB"):
            if not getattr(self, name):
                raise ParameterError(f"{name} must be non-empty")
        if self.num_draws < 1 or self.num_realizations < 1:
            raise ParameterError("num_draws and num_realizations must be >= 1")

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.num_symbols, self.num_subframes, self.bandwidth,
                           self.frame_duration, self.throughput_target,
                           self.bandwidth_inefficiency)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    default = _FIELDS[name].default
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            conv = int if name in ("antennas_sweep", "users_sweep", "mc_antennas") else float
            return tuple(conv(float(s)) if conv is int else conv(s) for s in items)
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ParameterError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted)."""
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ParameterError(f"line {lineno}: unknown key {key!r}")
        changes[key] = _convert(key, raw)
    return (base or ExperimentConfig()).replace(**changes)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def distances(config: ExperimentConfig) -> np.ndarray:
    """Users evenly spaced on ``(R_min, R_max]``."""
    U = config.num_users
    j = np.arange(1, U + 1)
    return config.R_min + (config.R_max - config.R_min) * j / U


def build_population(config: ExperimentConfig) -> UserSet:
    """Users with path-loss gains and a common (or per-user) energy budget.

    ``worst_user_0dB`` rescales the gains so the farthest user receives unit
    energy at the reference budget; ``raw`` keeps ``G0 * d^-alpha``.
    """
    beta = config.G0 * distances(config) ** (-config.alpha)
    if config.calibration == "worst_user_0dB":
        beta = beta / (10.0 ** (config.calibration_reference_dB / 10.0) * beta[-1])
    elif config.calibration != "raw":
        raise ParameterError(f"unknown calibration {config.calibration!r}")
    if config.energies_dB:
        energy = 10.0 ** (np.asarray(config.energies_dB) / 10.0)
    else:
        energy = np.full(config.num_users, 10.0 ** (config.energy_dB / 10.0))
    return UserSet.from_arrays(energy, beta)
