"""Scenario configuration, random draws and gain-phase impairment sampling.

All randomness in the package flows through :class:`RandomStreams`, which
derives independent counter-based generators from ``(seed, tag, index...)``
keys. Two calls with the same key always produce the same numbers, whatever
order (or process) they run in.
"""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

SPEED_OF_LIGHT = 3e8
"Speed of light in m/s (60 GHz gives the 5 mm wavelength used for the array)."

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


class ConfigError(ValueError):
    """Invalid configuration value or unreadable configuration file."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical, prior, grid and training parameters.

    Defaults reproduce the full-scale simulation regime (64 antennas,
    256 subcarriers at 240 kHz, 60 GHz carrier). Angles in the prior ranges
    are in degrees; the impairment phase range is in radians.
    """

    n_antennas: int = 64
    n_subcarriers: int = 256
    subcarrier_spacing: float = 240e3
    carrier_freq: float = 60e9
    element_spacing: float | None = None
    r_min: float = 10.0
    r_max: float = 43.75
    theta_mean_range: tuple[float, float] = (-60.0, 60.0)
    delta_theta_range: tuple[float, float] = (10.0, 20.0)
    snr_db: float = 15.0
    sigma_gamma_sq: float = 1.0
    kappa_mag_range: tuple[float, float] = (0.95, 1.05)
    kappa_phase_range: tuple[float, float] = (-np.pi / 2, np.pi / 2)
    n_theta_grid: int = 100
    n_tau_grid: int = 100
    target_prior: float = 0.5
    learning_rate: float = 1e-2
    batch_size: int = 1024
    n_iterations: int = 10_000
    n_eval_trials: int = 10_000
    n_gpi_realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("theta_mean_range", "delta_theta_range", "kappa_mag_range", "kappa_phase_range"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 2 or value[0] > value[1]:
                raise ConfigError(f"{name} must be an ordered pair, got {value}")
            object.__setattr__(self, name, value)
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.wavelength / 2)
        if self.n_antennas < 1 or self.n_subcarriers < 1:
            raise ConfigError("n_antennas and n_subcarriers must be >= 1")
        if self.n_theta_grid < 2 or self.n_tau_grid < 2:
            raise ConfigError("grids need at least 2 points per axis")
        if not self.r_min < self.r_max:
            raise ConfigError("r_min must be smaller than r_max")
        if min(self.subcarrier_spacing, self.carrier_freq, self.element_spacing) <= 0:
            raise ConfigError("frequencies and element spacing must be positive")
        if self.sigma_gamma_sq <= 0 or not np.isfinite(self.snr_db):
            raise ConfigError("sigma_gamma_sq must be positive and snr_db finite")
        if not self.n0 > 0:
            raise ConfigError("noise power must be strictly positive")
        if self.kappa_mag_range[0] < 0 or self.kappa_mag_range[1] <= 0:
            raise ConfigError("kappa magnitudes must be nonnegative and not all zero")
        if not 0.0 <= self.target_prior <= 1.0:
            raise ConfigError("target_prior must lie in [0, 1]")
        if self.batch_size < 1 or self.n_iterations < 0 or self.learning_rate <= 0:
            raise ConfigError("invalid training parameters")
        if self.n_eval_trials < 1 or self.n_gpi_realizations < 1:
            raise ConfigError("evaluation counts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def n0(self) -> float:
        """Noise power per matrix entry, from SNR = sigma_gamma^2 N S / N0."""
        return self.sigma_gamma_sq * self.n_antennas * self.n_subcarriers / 10 ** (self.snr_db / 10)

    @property
    def n0_over_sigma2(self) -> float:
        return self.n0 / self.sigma_gamma_sq

    @property
    def tau_min(self) -> float:
        return 2 * self.r_min / SPEED_OF_LIGHT

    @property
    def tau_max(self) -> float:
        return 2 * self.r_max / SPEED_OF_LIGHT

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def desk(cls, **changes) -> "ScenarioConfig":
        """Reduced problem size that trains in about a minute on one core."""
        base = dict(n_antennas=16, n_subcarriers=32, n_theta_grid=64, n_tau_grid=64,
                    batch_size=256, n_iterations=2000, n_eval_trials=5000,
                    n_gpi_realizations=10)
        base.update(changes)
        return cls(**base)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ScenarioConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**{k: _coerce(known[k], v) for k, v in values.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


PRESETS = {"table1": ScenarioConfig, "desk": ScenarioConfig.desk}


def _coerce(f: dataclasses.Field, value: Any) -> Any:
    if isinstance(value, str):
        value = yaml.safe_load(value)
    if value is None:
        return None
    if "tuple" in str(f.type):
        return tuple(float(v) for v in value)
    if f.type == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{f.name} must be an integer")
        return int(value)
    if "float" in str(f.type):
        return float(value)
    return value


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None,
                preset: str = "desk") -> ScenarioConfig:
    """Build a config from a preset, an optional YAML file and overrides.

    Later sources win: preset defaults, then file keys, then ``overrides``.
    The file may itself name a ``preset`` key, and a run manifest written
    by the command line tool is accepted in place of a config file.
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping")
        if isinstance(loaded.get("config"), dict):  # a run manifest
            loaded = loaded["config"]
        values.update(loaded)
    values.update(overrides or {})
    preset = values.pop("preset", preset)
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    base = PRESETS[preset]().to_dict()
    base.update(values)
    return ScenarioConfig.from_mapping(base)


@dataclass(frozen=True)
class RandomStreams:
    """Keyed source of independent Philox generators.

    ``streams.generator("train", 3)`` is a pure function of the seed, the
    prefix, the tag and the index, so work can be split across processes
    without changing any number.
    """

    seed: int
    prefix: tuple[int, ...] = ()

    def child(self, *index: int) -> "RandomStreams":
        return RandomStreams(self.seed, self.prefix + tuple(int(i) for i in index))

    def generator(self, tag: str, *index: int) -> np.random.Generator:
        key = self.prefix + (zlib.crc32(tag.encode()),) + tuple(int(i) for i in index)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=key)))


@dataclass(frozen=True)
class GainPhase:
    """Per-element complex receive gains, normalized to squared norm N."""

    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=complex).ravel())

    @classmethod
    def ideal(cls, n: int) -> "GainPhase":
        return cls(np.ones(n, dtype=complex))

    @classmethod
    def normalized(cls, kappa) -> "GainPhase":
        kappa = np.asarray(kappa, dtype=complex).ravel()
        return cls(kappa * (np.sqrt(kappa.size) / np.linalg.norm(kappa)))

    def __len__(self):
        return self.kappa.size


def as_kappa(kappa) -> np.ndarray:
    return kappa.kappa if isinstance(kappa, GainPhase) else np.asarray(kappa, dtype=complex)


@dataclass(frozen=True)
class ScenarioDraw:
    """One realization of the target variables and transmitted symbols."""

    t: int
    gamma: complex
    theta: float
    tau: float
    x: np.ndarray
    theta_min: float
    theta_max: float


@dataclass(frozen=True)
class ScenarioBatch:
    """A batch of draws stored column-wise (leading axis = sample)."""

    t: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    tau: np.ndarray
    x: np.ndarray
    theta_min: np.ndarray
    theta_max: np.ndarray

    def __len__(self):
        return self.t.size

    def __getitem__(self, k: int) -> ScenarioDraw:
        return ScenarioDraw(int(self.t[k]), complex(self.gamma[k]), float(self.theta[k]),
                            float(self.tau[k]), self.x[k], float(self.theta_min[k]),
                            float(self.theta_max[k]))

    @classmethod
    def stack(cls, draws) -> "ScenarioBatch":
        draws = list(draws)
        return cls(**{f.name: np.array([getattr(d, f.name) for d in draws])
                      for f in dataclasses.fields(cls)})


def draw_batch(config: ScenarioConfig, rng: np.random.Generator, size: int,
               t: int | None = None) -> ScenarioBatch:
    """Draw ``size`` independent scenarios.

    ``t`` forces target presence (0 or 1) instead of sampling it from the
    prior; the other variables are consumed from ``rng`` either way so that
    forced and unforced batches stay aligned.
    """
    present = rng.random(size) < config.target_prior
    if t is not None:
        present = np.full(size, bool(t))
    gamma = np.sqrt(config.sigma_gamma_sq / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
    lo, hi = np.deg2rad(config.theta_mean_range)
    mean = rng.uniform(lo, hi, size)
    lo, hi = np.deg2rad(config.delta_theta_range)
    span = rng.uniform(lo, hi, size)
    theta_min, theta_max = mean - span / 2, mean + span / 2
    theta = theta_min + (theta_max - theta_min) * rng.random(size)
    tau = rng.uniform(config.tau_min, config.tau_max, size)
    x = QPSK[rng.integers(0, 4, (size, config.n_subcarriers))]
    return ScenarioBatch(present.astype(int), gamma, theta, tau, x, theta_min, theta_max)


def draw_scenario(config: ScenarioConfig, rng: np.random.Generator) -> ScenarioDraw:
    return draw_batch(config, rng, 1)[0]


def draw_gain_phase(config: ScenarioConfig, rng: np.random.Generator) -> GainPhase:
    """Sample element magnitudes and phases uniformly, then rescale to norm sqrt(N)."""
    n = config.n_antennas
    mag = rng.uniform(*config.kappa_mag_range, n)
    phase = rng.uniform(*config.kappa_phase_range, n)
    return GainPhase.normalized(mag * np.exp(1j * phase))
