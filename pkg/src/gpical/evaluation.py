"""Monte Carlo evaluation: ROC curves, position RMSE and impairment error.

Every method is scored on the same evaluation draws (common random
numbers), so differences between methods come from the assumed
impairments only.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrate import LossChoice, NonFiniteLossError, train
from .detector import maprt_batch
from .scenario import SPEED_OF_LIGHT, GainPhase, RandomStreams, ScenarioConfig, as_kappa, draw_batch, draw_gain_phase
from .signal import synthesize_batch

METHOD_TAGS = ("known-kappa", "uncompensated", "learned-max", "learned-norm")
CHUNK = 250


class RunFailure(RuntimeError):
    def __init__(self, realization: int, cause: Exception):
        super().__init__(f"realization {realization} failed: {cause}")
        self.realization = realization


@dataclass(frozen=True)
class RocPoint:
    eta: float
    p_fa: float
    p_d: float
    n_h0: int
    n_h1: int


@dataclass(frozen=True)
class EvalReport:
    method_tag: str
    roc: list[RocPoint]
    angle_rmse: float  # degrees
    range_rmse: float  # meters
    kappa_error: float
    n_realizations: int = 1


def kappa_error(kappa_hat, kappa_true) -> float:
    """Relative error after removing the unobservable global phase.

    ``min_phi ||exp(1j phi) kappa_hat - kappa|| / ||kappa||``, attained at
    ``phi = angle(kappa_hat^H kappa)``.
    """
    kh, k = as_kappa(kappa_hat), as_kappa(kappa_true)
    if kh.shape != k.shape:
        raise ValueError("kappa vectors differ in length")
    phi = np.angle(np.vdot(kh, k))
    return float(np.linalg.norm(np.exp(1j * phi) * kh - k) / np.linalg.norm(k))


def roc_from_statistics(h0, h1) -> list[RocPoint]:
    """Exact empirical ROC, sweeping every pooled statistic as a threshold.

    A trial is declared a detection when its statistic is strictly above
    the threshold. The sweep starts at 0 and ends at +inf.
    """
    h0, h1 = np.sort(np.asarray(h0, float)), np.sort(np.asarray(h1, float))
    etas = np.unique(np.concatenate(([0.0], h0, h1, [np.inf])))
    p_fa = (h0.size - np.searchsorted(h0, etas, side="right")) / h0.size
    p_d = (h1.size - np.searchsorted(h1, etas, side="right")) / h1.size
    return [RocPoint(float(e), float(f), float(d), h0.size, h1.size)
            for e, f, d in zip(etas, p_fa, p_d)]


def pd_at_pfa(roc: list[RocPoint], p_fa: float) -> float:
    """Best detection probability among thresholds with false-alarm rate <= ``p_fa``."""
    return max(pt.p_d for pt in roc if pt.p_fa <= p_fa)


@dataclass
class TrialStatistics:
    """Per-trial outputs of the MAP ratio test for one assumed kappa."""

    h0: list = field(default_factory=list)
    h1: list = field(default_factory=list)
    angle_err: list = field(default_factory=list)  # radians
    range_err: list = field(default_factory=list)  # meters

    def extend(self, other: "TrialStatistics") -> None:
        for name in ("h0", "h1", "angle_err", "range_err"):
            getattr(self, name).extend(getattr(other, name))

    def roc(self) -> list[RocPoint]:
        return roc_from_statistics(np.concatenate(self.h0), np.concatenate(self.h1))

    def rmse(self) -> tuple[float, float]:
        angle = np.concatenate(self.angle_err)
        rng = np.concatenate(self.range_err)
        return (float(np.degrees(np.sqrt(np.mean(angle ** 2)))),
                float(np.sqrt(np.mean(rng ** 2))))


def score_draws(config: ScenarioConfig, obs, kappas: dict, out: dict[str, TrialStatistics]) -> None:
    """Append the test outputs for one synthesized chunk to ``out``."""
    draws = obs.truth
    for tag, kappa in kappas.items():
        stat, theta_hat, tau_hat = maprt_batch(obs.y, obs.x, kappa, draws.theta_min,
                                               draws.theta_max, config)
        present = draws.t == 1
        out[tag].h0.append(stat[~present])
        out[tag].h1.append(stat[present])
        out[tag].angle_err.append((theta_hat - draws.theta)[present])
        out[tag].range_err.append(((tau_hat - draws.tau) * SPEED_OF_LIGHT / 2)[present])


def collect_statistics(config: ScenarioConfig, kappas: dict, kappa_true, n_trials: int,
                       streams: RandomStreams, hypotheses=(0, 1)) -> dict[str, TrialStatistics]:
    """Run the test for every assumed kappa on shared draws of each hypothesis."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = {tag: TrialStatistics() for tag in kappas}
    for t in hypotheses:
        for chunk, start in enumerate(range(0, n_trials, CHUNK)):
            rng = streams.generator(f"eval-h{t}", chunk)
            draws = draw_batch(config, rng, min(CHUNK, n_trials - start), t=t)
            score_draws(config, synthesize_batch(draws, kappa_true, config.n0, rng, config),
                        kappas, out)
    return out


def roc_curve(config: ScenarioConfig, kappa_assumed, kappa_true, n_trials: int,
              streams: RandomStreams) -> list[RocPoint]:
    stats = collect_statistics(config, {"m": kappa_assumed}, kappa_true, n_trials, streams)
    return stats["m"].roc()


def position_rmse(config: ScenarioConfig, kappa_assumed, kappa_true, n_trials: int,
                  streams: RandomStreams) -> tuple[float, float]:
    """Ungated angle (degrees) and range (meters) RMSE over target-present trials."""
    stats = collect_statistics(config, {"m": kappa_assumed}, kappa_true, n_trials, streams,
                               hypotheses=(1,))
    return stats["m"].rmse()


@dataclass
class RealizationResult:
    index: int
    kappa_true: GainPhase
    kappa_hat: dict[str, GainPhase]
    loss_history: dict[str, np.ndarray]
    stats: dict[str, TrialStatistics]

    def kappa_errors(self) -> dict[str, float]:
        ones = np.ones(len(self.kappa_true))
        return {"known-kappa": 0.0,
                "uncompensated": kappa_error(ones, self.kappa_true),
                **{tag: kappa_error(k, self.kappa_true) for tag, k in self.kappa_hat.items()}}


def run_realization(config: ScenarioConfig, index: int) -> RealizationResult:
    """Draw one impairment vector, train both losses on it and score all methods."""
    streams = RandomStreams(config.seed).child(index)
    kappa_true = draw_gain_phase(config, streams.generator("kappa"))
    learned, history = {}, {}
    for choice in LossChoice:
        tag = f"learned-{choice.value}"
        try:
            learned[tag], history[tag] = train(config, choice, kappa_true, streams)
        except NonFiniteLossError as exc:
            raise RunFailure(index, exc) from exc
    kappas = {"known-kappa": kappa_true, "uncompensated": GainPhase.ideal(config.n_antennas),
              **learned}
    stats = collect_statistics(config, kappas, kappa_true, config.n_eval_trials, streams)
    return RealizationResult(index, kappa_true, learned, history, stats)


def aggregate(results: list[RealizationResult]) -> list[EvalReport]:
    """Pool trials across realizations into one report per method."""
    reports = []
    for tag in METHOD_TAGS:
        pooled = TrialStatistics()
        for res in results:
            pooled.extend(res.stats[tag])
        angle, rng = pooled.rmse()
        kerr = float(np.mean([res.kappa_errors()[tag] for res in results]))
        reports.append(EvalReport(tag, pooled.roc(), angle, rng, kerr, len(results)))
    return reports


def _run_one(args):
    return run_realization(*args)


def compare(config: ScenarioConfig, n_gpi_realizations: int | None = None,
            workers: int = 1) -> list[RealizationResult]:
    n = config.n_gpi_realizations if n_gpi_realizations is None else n_gpi_realizations
    if n < 1:
        raise ValueError("n_gpi_realizations must be >= 1")
    jobs = [(config, r) for r in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def run_comparison(config: ScenarioConfig, n_gpi_realizations: int | None = None,
                   workers: int = 1) -> list[EvalReport]:
    """Train and evaluate every method over several impairment realizations.

    Randomness is keyed on ``config.seed`` and the realization index, so the
    result does not depend on ``workers``.
    """
    return aggregate(compare(config, n_gpi_realizations, workers))


def write_roc_csv(path: str | Path, reports: list[EvalReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eta", "p_fa", "p_d", "n_h0", "n_h1", "method_tag"])
        for rep in reports:
            for pt in rep.roc:
                writer.writerow([repr(pt.eta), repr(pt.p_fa), repr(pt.p_d), pt.n_h0, pt.n_h1,
                                 rep.method_tag])


def write_summary_csv(path: str | Path, reports: list[EvalReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method_tag", "angle_rmse_deg", "range_rmse_m", "kappa_error",
                         "n_realizations"])
        for rep in reports:
            writer.writerow([rep.method_tag, repr(rep.angle_rmse), repr(rep.range_rmse),
                             repr(rep.kappa_error), rep.n_realizations])
