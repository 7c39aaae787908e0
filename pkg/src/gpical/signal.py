"""Frequency-domain synthesis of the impaired received OFDM observation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import GainPhase, ScenarioBatch, ScenarioConfig, ScenarioDraw, as_kappa


def unit_phasor(phase) -> np.ndarray:
    """``exp(1j * phase)`` for real phase; cos/sin is much faster than complex exp."""
    phase = np.asarray(phase, dtype=float)
    out = np.empty(phase.shape, dtype=complex)
    np.cos(phase, out=out.real)
    np.sin(phase, out=out.imag)
    return out


def phase_ramp(step, n: int) -> np.ndarray:
    """``exp(1j * step * k)`` for k = 0..n-1, ramp axis appended last.

    Filled by doubling: entries [L, 2L) are entries [0, L) times
    ``exp(1j * step * L)``, the latter obtained by repeated squaring. One
    trig evaluation per step value; rounding error grows like log2(n) ulp
    per level, about 1e-13 at n = 256.
    """
    step = np.asarray(step, dtype=float)
    out = np.empty(step.shape + (n,), dtype=complex)
    out[..., 0] = 1.0
    rotor = unit_phasor(step)[..., None]
    filled = 1
    while filled < n:
        m = min(filled, n - filled)
        np.multiply(out[..., :m], rotor, out=out[..., filled:filled + m])
        filled += m
        if filled < n:
            rotor = rotor * rotor
    return out


def steering_vector(theta, kappa, config: ScenarioConfig) -> np.ndarray:
    """Impaired ULA response ``kappa * exp(-j 2 pi n d sin(theta) / lambda)``.

    ``theta`` may be an array; the element axis is appended last, so a
    theta of shape ``(B, K)`` gives ``(B, K, N)``.
    """
    step = np.sin(theta) * (-2 * np.pi * config.element_spacing / config.wavelength)
    return as_kappa(kappa) * phase_ramp(step, config.n_antennas)


def delay_vector(tau, config: ScenarioConfig) -> np.ndarray:
    """Per-subcarrier delay response ``exp(-j 2 pi s df tau)``, subcarrier axis last."""
    return phase_ramp(np.multiply(tau, -2 * np.pi * config.subcarrier_spacing), config.n_subcarriers)


@dataclass(frozen=True)
class Observation:
    """Received N x S matrix plus the ground truth used to generate it.

    ``truth`` and ``kappa_true`` are only for scoring; estimators read ``y``
    and the known symbols ``truth.x``.
    """

    y: np.ndarray
    truth: ScenarioDraw
    kappa_true: GainPhase
    noise_power: float

    @property
    def x(self) -> np.ndarray:
        return self.truth.x


@dataclass(frozen=True)
class ObservationBatch:
    """Stacked observations, ``y`` of shape (B, N, S)."""

    y: np.ndarray
    truth: ScenarioBatch
    kappa_true: GainPhase
    noise_power: float

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, k: int) -> Observation:
        return Observation(self.y[k], self.truth[k], self.kappa_true, self.noise_power)

    @property
    def x(self) -> np.ndarray:
        return self.truth.x

    @classmethod
    def stack(cls, observations) -> "ObservationBatch":
        observations = list(observations)
        if not observations:
            raise ValueError("empty batch")
        first = observations[0]
        return cls(np.stack([o.y for o in observations]),
                   ScenarioBatch.stack(o.truth for o in observations),
                   first.kappa_true, first.noise_power)


def as_batch(batch) -> ObservationBatch:
    if isinstance(batch, ObservationBatch):
        return batch
    if isinstance(batch, Observation):
        return ObservationBatch.stack([batch])
    return ObservationBatch.stack(batch)


def noiseless_batch(draws: ScenarioBatch, kappa, config: ScenarioConfig) -> np.ndarray:
    a = steering_vector(draws.theta, kappa, config)
    bx = delay_vector(draws.tau, config) * draws.x
    return (draws.t * draws.gamma)[:, None, None] * a[:, :, None] * bx[:, None, :]


def synthesize_batch(draws: ScenarioBatch, kappa: GainPhase, n0: float, rng: np.random.Generator,
                     config: ScenarioConfig) -> ObservationBatch:
    """Vectorized synthesis; noise entries are CN(0, n0)."""
    if n0 < 0:
        raise ValueError("noise power must be nonnegative")
    y = noiseless_batch(draws, kappa, config)
    shape = y.shape
    noise = rng.standard_normal(shape + (2,)).view(complex)[..., 0]
    y = y + np.sqrt(n0 / 2) * noise
    return ObservationBatch(y, draws, kappa if isinstance(kappa, GainPhase) else GainPhase(kappa), n0)


def synthesize(draw: ScenarioDraw, kappa: GainPhase, n0: float, rng: np.random.Generator,
               config: ScenarioConfig) -> Observation:
    return synthesize_batch(ScenarioBatch.stack([draw]), kappa, n0, rng, config)[0]


def write_matrix_csv(path: str | Path, matrix: np.ndarray) -> None:
    """Write a complex matrix row-major with one ``re,im`` pair per cell."""
    matrix = np.atleast_2d(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{part}{j}" for j in range(matrix.shape[1]) for part in ("re", "im")])
        for row in matrix:
            writer.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0::2] + 1j * data[:, 1::2]
