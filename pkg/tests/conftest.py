import numpy as np
import pytest

from gpical import GainPhase, RandomStreams, ScenarioConfig, draw_gain_phase

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small():
    """Tiny config: fast enough for exhaustive brute-force oracles."""
    return ScenarioConfig.desk(n_antennas=4, n_subcarriers=2, n_theta_grid=5, n_tau_grid=7,
                               batch_size=4, n_iterations=5, n_eval_trials=20)


@pytest.fixture
def medium():
    return ScenarioConfig.desk(n_antennas=8, n_subcarriers=8, n_theta_grid=16, n_tau_grid=16,
                               batch_size=4, n_iterations=20, n_eval_trials=200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_kappa(config, seed) -> GainPhase:
    return draw_gain_phase(config, RandomStreams(seed).generator("test-kappa"))
