"""Angle-delay map, MAP ratio test detector and closed-form gain estimate.

The map for an observation ``Y`` with known symbols ``x`` and assumed
impairments ``kappa`` is::

    M = | Phi_theta(kappa)^H  Y  (Phi_tau * x 1^T)^* |^2

evaluated on a uniform (theta, tau) grid spanning the prior region. Its
maximum is the detection statistic and its argmax the position estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .scenario import ScenarioConfig, as_kappa
from .signal import delay_vector, steering_vector


@dataclass(frozen=True)
class GridSpec:
    theta_axis: np.ndarray
    tau_axis: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta_axis.size, self.tau_axis.size


def make_grid(theta_min: float, theta_max: float, config: ScenarioConfig) -> GridSpec:
    """Uniform grid with inclusive endpoints over the angle prior and the delay prior."""
    return GridSpec(np.linspace(theta_min, theta_max, config.n_theta_grid),
                    tau_axis(config))


def tau_axis(config: ScenarioConfig) -> np.ndarray:
    return np.linspace(config.tau_min, config.tau_max, config.n_tau_grid)


def theta_axes(theta_min, theta_max, config: ScenarioConfig) -> np.ndarray:
    """Per-sample angle axes, shape (B, N_theta)."""
    return np.linspace(theta_min, theta_max, config.n_theta_grid, axis=-1)


def grid_for(draw, config: ScenarioConfig) -> GridSpec:
    return make_grid(draw.theta_min, draw.theta_max, config)


@dataclass(frozen=True)
class AngleDelayMap:
    values: np.ndarray
    grid: GridSpec


@dataclass(frozen=True)
class DetectionResult:
    statistic: float
    detected: bool
    theta_hat: float
    tau_hat: float
    gamma_hat: complex
    argmax_indices: tuple[int, int]


def build_dictionaries(kappa_hat, grid: GridSpec, config: ScenarioConfig):
    """Return (Phi_theta, Phi_tau), steering and delay vectors as columns."""
    phi_theta = steering_vector(grid.theta_axis, kappa_hat, config).T
    phi_tau = delay_vector(grid.tau_axis, config).T
    return phi_theta, phi_tau


def _matrix(y) -> np.ndarray:
    return y.y if hasattr(y, "y") else np.asarray(y)


def angle_delay_map(y, x, kappa_hat, grid: GridSpec, config: ScenarioConfig) -> AngleDelayMap:
    y = _matrix(y)
    x = np.asarray(x)
    if y.shape != (config.n_antennas, config.n_subcarriers) or x.shape != (config.n_subcarriers,):
        raise ValueError(f"dimension mismatch: y {y.shape}, x {x.shape}")
    phi_theta, phi_tau = build_dictionaries(kappa_hat, grid, config)
    corr = phi_theta.conj().T @ y @ (phi_tau * x[:, None]).conj()
    return AngleDelayMap(squared_magnitude(corr), grid)


def squared_magnitude(z: np.ndarray) -> np.ndarray:
    sq = np.square(np.ascontiguousarray(z).view(float))
    return sq[..., 0::2] + sq[..., 1::2]


def argmax_2d(values: np.ndarray) -> tuple[int, int]:
    """Row-major first maximum, so ties resolve to the lowest (i, j)."""
    return np.unravel_index(int(np.argmax(values)), values.shape)


def estimate_gain(y, x, theta_hat: float, tau_hat: float, kappa_assumed, n0_over_sigma2: float,
                  config: ScenarioConfig) -> complex:
    """Ridge estimate of the channel gain at a fixed (theta, tau).

    Uses ``||M||_F^2 = N ||x||^2`` and ``vec(M)^H vec(Y) = a^H Y (b*x)^*``
    so the rank-one model matrix is never formed.
    """
    if n0_over_sigma2 < 0:
        raise ValueError("n0_over_sigma2 must be nonnegative")
    y = _matrix(y)
    x = np.asarray(x)
    a = steering_vector(theta_hat, kappa_assumed, config)
    bx = delay_vector(tau_hat, config) * x
    inner = a.conj() @ y @ bx.conj()
    return complex(inner / (config.n_antennas * np.vdot(x, x).real + n0_over_sigma2))


def reconstruct(theta_hat: float, tau_hat: float, gamma_hat: complex, x, kappa_hat,
                config: ScenarioConfig) -> np.ndarray:
    a = steering_vector(theta_hat, kappa_hat, config)
    bx = delay_vector(tau_hat, config) * np.asarray(x)
    return gamma_hat * np.outer(a, bx)


def maprt(y, x, kappa_assumed, grid: GridSpec, eta: float, config: ScenarioConfig,
          n0_over_sigma2: float | None = None) -> DetectionResult:
    """Threshold the map maximum and report the grid estimates at the argmax."""
    if eta < 0:
        raise ValueError("threshold must be nonnegative")
    if n0_over_sigma2 is None:
        n0_over_sigma2 = config.n0_over_sigma2
    amap = angle_delay_map(y, x, kappa_assumed, grid, config)
    i, j = argmax_2d(amap.values)
    statistic = float(amap.values[i, j])
    theta_hat, tau_hat = float(grid.theta_axis[i]), float(grid.tau_axis[j])
    gamma_hat = estimate_gain(y, x, theta_hat, tau_hat, kappa_assumed, n0_over_sigma2, config)
    return DetectionResult(statistic, statistic > eta, theta_hat, tau_hat, gamma_hat, (int(i), int(j)))


@dataclass(frozen=True)
class BatchMap:
    """Batched map pieces reused by the losses and their gradients.

    ``z[b, :, j] = Y_b (b(tau_j) * x_b)^*`` does not depend on kappa; ``a0``
    holds unimpaired steering vectors on each sample's angle axis and
    ``corr`` the complex matched-filter outputs whose squared magnitude is
    the map.
    """

    corr: np.ndarray  # (B, N_theta, N_tau)
    z: np.ndarray  # (B, N, N_tau)
    a0: np.ndarray  # (B, N_theta, N)
    theta_axes: np.ndarray  # (B, N_theta)
    tau_axis: np.ndarray  # (N_tau,)

    @cached_property
    def values(self) -> np.ndarray:
        return squared_magnitude(self.corr)

    def argmax(self) -> tuple[np.ndarray, np.ndarray]:
        values = self.values
        flat = values.reshape(values.shape[0], -1).argmax(axis=1)
        return np.divmod(flat, values.shape[2])


def batch_map(y: np.ndarray, x: np.ndarray, kappa_hat, theta_min, theta_max,
              config: ScenarioConfig) -> BatchMap:
    """Angle-delay maps for a whole batch, each on its own angle prior."""
    b, n, s = y.shape
    axes = theta_axes(theta_min, theta_max, config)
    taus = tau_axis(config)
    phi_tau = delay_vector(taus, config)  # (N_tau, S)
    z = ((y * x.conj()[:, None, :]).reshape(b * n, s) @ phi_tau.conj().T).reshape(b, n, -1)
    a0 = steering_vector(axes, 1.0, config)
    corr = a0.conj() @ (as_kappa(kappa_hat).conj()[:, None] * z)
    return BatchMap(corr, z, a0, axes, taus)


def maprt_batch(y: np.ndarray, x: np.ndarray, kappa_assumed, theta_min, theta_max,
                config: ScenarioConfig):
    """Statistic and (theta_hat, tau_hat) per sample, without the gain step."""
    bmap = batch_map(y, x, kappa_assumed, theta_min, theta_max, config)
    i, j = bmap.argmax()
    rows = np.arange(y.shape[0])
    stat = bmap.values[rows, i, j]
    return stat, bmap.theta_axes[rows, i], bmap.tau_axis[j]


def write_map_csv(path: str | Path, amap: AngleDelayMap, scale: float = 1.0) -> None:
    """Write map values divided by ``scale``; first row is the tau axis, first column theta."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta_rad\\tau_s"] + [repr(float(t)) for t in amap.grid.tau_axis])
        for theta, row in zip(amap.grid.theta_axis, amap.values / scale):
            writer.writerow([repr(float(theta))] + [repr(float(v)) for v in row])


def read_map_csv(path: str | Path) -> AngleDelayMap:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")[1:]
    return AngleDelayMap(data[:, 1:], GridSpec(data[:, 0], np.array(header, dtype=float)))
