"""Unsupervised learning of the receive-array gain-phase errors.

Two losses are available, both computed from the angle-delay map of each
training observation with the current impairment estimate ``kappa_hat``:

* ``MAP_MAX``: minus the map maximum, averaged over the batch;
* ``RECONSTRUCTION``: Frobenius norm (not squared) of the residual between
  the observation and its rank-one reconstruction at the map argmax.

Gradients are taken with respect to the real and imaginary parts of
``kappa_hat``, interleaved as ``[re0, im0, re1, im1, ...]``, holding each
sample's argmax cell fixed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .detector import batch_map
from .scenario import GainPhase, RandomStreams, ScenarioConfig, as_kappa, draw_batch
from .signal import ObservationBatch, as_batch, delay_vector, synthesize_batch

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


class LossChoice(enum.Enum):
    MAP_MAX = "max"
    RECONSTRUCTION = "norm"


class NonFiniteLossError(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite loss or gradient at iteration {iteration}")
        self.iteration = iteration


def to_real(z: np.ndarray) -> np.ndarray:
    return np.column_stack((z.real, z.imag)).ravel()


def to_complex(r: np.ndarray) -> np.ndarray:
    return r[0::2] + 1j * r[1::2]


def loss_and_gradient(batch, kappa_hat, choice: LossChoice, config: ScenarioConfig,
                      n0_over_sigma2: float | None = None):
    """Batch-mean loss and its real 2N-gradient (straight-through argmax)."""
    batch = as_batch(batch)
    choice = LossChoice(choice)
    k = as_kappa(kappa_hat)
    x = batch.x
    bmap = batch_map(batch.y, x, k, batch.truth.theta_min, batch.truth.theta_max, config)
    i, j = bmap.argmax()
    rows = np.arange(len(batch))
    c = bmap.corr[rows, i, j]
    u = bmap.a0[rows, i]  # (B, N) unimpaired steering at the argmax angle
    w = u.conj() * bmap.z[rows, :, j]  # so that c = k^H w

    if choice is LossChoice.MAP_MAX:
        loss = -np.mean(np.abs(c) ** 2)
        grad = -np.mean(2 * w * c.conj()[:, None], axis=0)
        return float(loss), to_real(grad)

    if n0_over_sigma2 is None:
        n0_over_sigma2 = config.n0_over_sigma2
    bx = delay_vector(bmap.tau_axis[j], config) * x  # (B, S)
    denom = config.n_antennas * np.sum(np.abs(x) ** 2, axis=1) + n0_over_sigma2
    gamma_hat = c / denom
    y_rec = (gamma_hat[:, None] * (k * u))[:, :, None] * bx[:, None, :]
    resid = batch.y - y_rec
    norms = np.sqrt(np.sum(resid.real ** 2 + resid.imag ** 2, axis=(1, 2)))
    q = (resid @ bx.conj()[:, :, None])[:, :, 0]
    p = np.sum(k * u * q.conj(), axis=1)
    grad_sq = -2 * (p[:, None] * w + (c.conj()[:, None] * u.conj()) * q) / denom[:, None]
    # norm is not differentiable at a zero residual; those samples contribute nothing
    scale = np.divide(1.0, 2 * norms, out=np.zeros_like(norms), where=norms > 0)
    grad = np.mean(grad_sq * scale[:, None], axis=0)
    return float(np.mean(norms)), to_real(grad)


def loss_map_max(batch, kappa_hat, config: ScenarioConfig) -> float:
    return loss_and_gradient(batch, kappa_hat, LossChoice.MAP_MAX, config)[0]


def loss_reconstruction(batch, kappa_hat, config: ScenarioConfig,
                        n0_over_sigma2: float | None = None) -> float:
    return loss_and_gradient(batch, kappa_hat, LossChoice.RECONSTRUCTION, config, n0_over_sigma2)[0]


def loss_gradient(batch, kappa_hat, choice: LossChoice, config: ScenarioConfig,
                  n0_over_sigma2: float | None = None) -> np.ndarray:
    return loss_and_gradient(batch, kappa_hat, choice, config, n0_over_sigma2)[1]


@dataclass(frozen=True)
class TrainState:
    kappa_hat: GainPhase
    adam_m: np.ndarray
    adam_v: np.ndarray
    iteration: int = 0
    loss_history: tuple[float, ...] = field(default=())

    @classmethod
    def initial(cls, kappa_hat: GainPhase) -> "TrainState":
        n2 = 2 * len(kappa_hat)
        return cls(kappa_hat, np.zeros(n2), np.zeros(n2))


def adam_update(params, grad, m, v, t: int, lr: float):
    """One bias-corrected Adam step; returns (params, m, v). ``t`` counts from 1."""
    m = BETA1 * m + (1 - BETA1) * grad
    v = BETA2 * v + (1 - BETA2) * grad * grad
    m_hat = m / (1 - BETA1 ** t)
    v_hat = v / (1 - BETA2 ** t)
    return params - lr * m_hat / (np.sqrt(v_hat) + EPSILON), m, v


def adam_step(state: TrainState, grad: np.ndarray, config: ScenarioConfig,
              loss: float | None = None) -> TrainState:
    """Adam update of kappa_hat followed by renormalization to ||kappa_hat||^2 = N."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.adam_m.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match state {state.adam_m.shape}")
    t = state.iteration + 1
    params, m, v = adam_update(to_real(state.kappa_hat.kappa), grad, state.adam_m,
                               state.adam_v, t, config.learning_rate)
    history = state.loss_history if loss is None else state.loss_history + (float(loss),)
    return TrainState(GainPhase.normalized(to_complex(params)), m, v, t, history)


def training_batch(config: ScenarioConfig, kappa_true: GainPhase, streams: RandomStreams,
                   iteration: int) -> ObservationBatch:
    rng = streams.generator("train", iteration)
    draws = draw_batch(config, rng, config.batch_size)
    return synthesize_batch(draws, kappa_true, config.n0, rng, config)


def tangent_gradient(grad: np.ndarray, kappa_hat) -> np.ndarray:
    """Drop the radial part of a real gradient at ``kappa_hat``.

    The result is the gradient of ``L(sqrt(N) k / |k|)`` at a point with
    ``|k|^2 = N``. The losses are scale sensitive, so without this Adam's
    per-coordinate scaling turns the radial pull into magnitude errors
    that the renormalization cannot undo.
    """
    k = to_real(as_kappa(kappa_hat))
    return grad - (grad @ k) / (k @ k) * k


def train(config: ScenarioConfig, choice: LossChoice, kappa_true: GainPhase,
          streams: RandomStreams,
          callback: Callable[[int, float, GainPhase], None] | None = None,
          project_radial: bool = True):
    """Learn kappa_hat from unlabeled observations, starting at all ones.

    ``kappa_true`` is only used to synthesize the observations. ``callback``
    receives ``(iteration, loss, kappa_hat)`` after every update. With
    ``project_radial=False`` the raw gradient goes to Adam and the norm is
    only restored after the step. Returns the final estimate and the
    per-iteration loss history.
    """
    choice = LossChoice(choice)
    state = TrainState.initial(GainPhase.ideal(config.n_antennas))
    for it in range(1, config.n_iterations + 1):
        batch = training_batch(config, kappa_true, streams, it)
        loss, grad = loss_and_gradient(batch, state.kappa_hat, choice, config)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise NonFiniteLossError(it)
        if project_radial:
            grad = tangent_gradient(grad, state.kappa_hat)
        state = adam_step(state, grad, config, loss)
        if callback is not None:
            callback(it, loss, state.kappa_hat)
    return state.kappa_hat, np.array(state.loss_history)
