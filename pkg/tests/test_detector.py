import numpy as np
import pytest

from gpical.detector import (AngleDelayMap, GridSpec, angle_delay_map, argmax_2d, batch_map,
                             build_dictionaries, estimate_gain, grid_for, make_grid, maprt,
                             maprt_batch, read_map_csv, reconstruct, write_map_csv)
from gpical.scenario import GainPhase, ScenarioConfig, ScenarioDraw, draw_batch
from gpical.signal import delay_vector, steering_vector, synthesize

from conftest import random_kappa


def brute_map(y, x, kappa, grid, config):
    """Direct triple loop over the grid, antennas and subcarriers."""
    n_ant, n_sub = y.shape
    out = np.zeros(grid.shape)
    for i, theta in enumerate(grid.theta_axis):
        for j, tau in enumerate(grid.tau_axis):
            acc = 0j
            for n in range(n_ant):
                a_n = kappa[n] * np.exp(-2j * np.pi * n * config.element_spacing * np.sin(theta) / config.wavelength)
                for s in range(n_sub):
                    b_s = np.exp(-2j * np.pi * s * config.subcarrier_spacing * tau)
                    acc += np.conj(a_n) * y[n, s] * np.conj(b_s * x[s])
            out[i, j] = abs(acc) ** 2
    return out


def on_grid_observation(config, kappa, i_star=2, j_star=3, gamma=1.0, n0=0.0, seed=0):
    grid = make_grid(np.deg2rad(10), np.deg2rad(25), config)
    x = draw_batch(config, np.random.default_rng(seed), 1).x[0]
    draw = ScenarioDraw(1, gamma, grid.theta_axis[i_star], grid.tau_axis[j_star], x,
                        grid.theta_axis[0], grid.theta_axis[-1])
    obs = synthesize(draw, kappa, n0, np.random.default_rng(seed + 1), config)
    return obs, grid


def test_grid_axes(small):
    grid = make_grid(-0.2, 0.3, small)
    assert grid.theta_axis[0] == -0.2 and grid.theta_axis[-1] == 0.3
    assert grid.tau_axis[0] == small.tau_min and grid.tau_axis[-1] == pytest.approx(small.tau_max)
    assert np.all(np.diff(grid.theta_axis) > 0) and np.all(np.diff(grid.tau_axis) > 0)
    assert grid.shape == (small.n_theta_grid, small.n_tau_grid)


def test_dictionaries(small):
    phi_t, phi_tau = build_dictionaries(GainPhase.ideal(4), GridSpec(np.array([0.0]), np.array([0.0])), small)
    assert np.array_equal(phi_t, np.ones((4, 1))) and np.array_equal(phi_tau, np.ones((2, 1)))
    grid = make_grid(-0.5, 0.4, small)
    phi_t, phi_tau = build_dictionaries(random_kappa(small, 3), grid, small)
    assert phi_t.shape == (4, small.n_theta_grid) and phi_tau.shape == (2, small.n_tau_grid)
    assert np.allclose(np.sum(np.abs(phi_t) ** 2, axis=0), 4, rtol=1e-9)
    assert np.allclose(np.sum(np.abs(phi_tau) ** 2, axis=0), 2, rtol=1e-9)
    assert np.allclose(phi_t[:, 2], steering_vector(grid.theta_axis[2], random_kappa(small, 3), small))


@pytest.mark.parametrize("seed", range(3))
def test_map_matches_brute_force(seed, small):
    kappa = random_kappa(small, seed)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    x = draw_batch(small, rng, 1).x[0]
    grid = make_grid(-0.4, 0.7, small)
    amap = angle_delay_map(y, x, kappa, grid, small)
    assert np.allclose(amap.values, brute_map(y, x, kappa.kappa, grid, small), rtol=1e-12)
    assert np.all(amap.values >= 0)


def test_on_grid_peak_value(small):
    kappa = random_kappa(small, 7)
    obs, grid = on_grid_observation(small, kappa)
    values = brute_map(obs.y, obs.x, kappa.kappa, grid, small)
    assert values[2, 3] == pytest.approx(64.0, rel=1e-9)
    amap = angle_delay_map(obs, obs.x, kappa, grid, small)
    assert amap.values[2, 3] == pytest.approx(64.0, rel=1e-9)
    assert argmax_2d(amap.values) == (2, 3)


def test_absent_target_zero_map(small):
    grid = make_grid(-0.1, 0.1, small)
    amap = angle_delay_map(np.zeros((4, 2)), np.ones(2), GainPhase.ideal(4), grid, small)
    assert not amap.values.any()


@pytest.mark.parametrize("seed", range(8))
def test_mismatched_kappa_lowers_peak(seed, small):
    kappa = random_kappa(small, 100 + seed)
    kappa_hat = random_kappa(small, 200 + seed)
    obs, grid = on_grid_observation(small, kappa, seed=seed)
    amap = angle_delay_map(obs, obs.x, kappa_hat, grid, small)
    expected = small.n_subcarriers ** 2 * abs(np.vdot(kappa_hat.kappa, kappa.kappa)) ** 2
    assert amap.values[2, 3] == pytest.approx(expected, rel=1e-9)
    assert amap.values[2, 3] < 64.0 * (1 - 1e-6)


def test_dimension_mismatch(small):
    with pytest.raises(ValueError):
        angle_delay_map(np.zeros((3, 2)), np.ones(2), GainPhase.ideal(4), make_grid(0, 1, small), small)


def test_maprt_absent_target(small):
    grid = make_grid(-0.1, 0.1, small)
    res = maprt(np.zeros((4, 2)), np.ones(2), GainPhase.ideal(4), grid, 0.5, small)
    assert res.statistic == 0 and not res.detected and res.gamma_hat == 0


def test_maprt_on_grid_recovery(small):
    kappa = random_kappa(small, 1)
    obs, grid = on_grid_observation(small, kappa, i_star=4, j_star=0, gamma=0.3 - 0.4j)
    res = maprt(obs, obs.x, kappa, grid, 1.0, small)
    assert res.argmax_indices == (4, 0)
    assert res.statistic == pytest.approx(0.25 * 64, rel=1e-9)
    assert res.detected
    assert res.theta_hat == grid.theta_axis[4] and res.tau_hat == grid.tau_axis[0]
    rho = small.n0_over_sigma2
    assert res.gamma_hat == pytest.approx((0.3 - 0.4j) * 8 / (8 + rho), rel=1e-12)


def test_maprt_tie_break_lowest_index(small, monkeypatch):
    import gpical.detector as det
    const = AngleDelayMap(np.ones((5, 7)), make_grid(0, 1, small))
    monkeypatch.setattr(det, "angle_delay_map", lambda *a, **k: const)
    res = det.maprt(np.zeros((4, 2)), np.ones(2), GainPhase.ideal(4), const.grid, 0.0, small)
    assert res.argmax_indices == (0, 0)
    assert argmax_2d(np.array([[0, 2, 2], [2, 0, 0]])) == (0, 1)


def test_maprt_rejects_negative_threshold(small):
    with pytest.raises(ValueError):
        maprt(np.zeros((4, 2)), np.ones(2), GainPhase.ideal(4), make_grid(0, 1, small), -1, small)


def test_gain_estimate_closed_forms(small):
    kappa = random_kappa(small, 2)
    x = draw_batch(small, np.random.default_rng(0), 1).x[0]
    theta, tau = 0.3, 1.1e-7
    m = np.outer(steering_vector(theta, kappa, small), delay_vector(tau, small) * x)
    assert estimate_gain(m, x, theta, tau, kappa, 0.0, small) == pytest.approx(1.0, rel=1e-12)
    g, rho = 0.7 + 0.2j, 3.0
    expected = g * 8 / (8 + rho)
    assert estimate_gain(g * m, x, theta, tau, kappa, rho, small) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        estimate_gain(m, x, theta, tau, kappa, -1.0, small)


@pytest.mark.parametrize("seed", range(5))
def test_gain_estimate_brute_force(seed):
    cfg = ScenarioConfig.desk(n_antennas=3, n_subcarriers=2)
    rng = np.random.default_rng(seed)
    kappa = random_kappa(cfg, seed)
    y = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    x = draw_batch(cfg, rng, 1).x[0]
    theta, tau, rho = rng.uniform(-1, 1), rng.uniform(cfg.tau_min, cfg.tau_max), rng.uniform(0, 5)
    m = np.outer(steering_vector(theta, kappa, cfg), delay_vector(tau, cfg) * x)
    vm, vy = m.reshape(-1, order="F"), y.reshape(-1, order="F")
    expected = np.conj(vm) @ vy / (np.real(np.conj(vm) @ vm) + rho)
    assert estimate_gain(y, x, theta, tau, kappa, rho, cfg) == pytest.approx(expected, rel=1e-12)


def test_norm_and_inner_product_identities(medium):
    rng = np.random.default_rng(99)
    for trial in range(100):
        kappa = random_kappa(medium, trial)
        theta = rng.uniform(-np.pi / 2, np.pi / 2)
        tau = rng.uniform(medium.tau_min, medium.tau_max)
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)  # any symbols, not only QPSK
        a = steering_vector(theta, kappa, medium)
        bx = delay_vector(tau, medium) * x
        m = np.outer(a, bx)
        assert np.linalg.norm(m) ** 2 == pytest.approx(medium.n_antennas * np.vdot(x, x).real, rel=1e-10)
        y = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        direct = np.vdot(m.ravel(), y.ravel())
        assert a.conj() @ y @ bx.conj() == pytest.approx(direct, rel=1e-10)


def test_reconstruction(small):
    kappa = random_kappa(small, 4)
    assert not reconstruct(0.1, 1e-7, 0.0, np.ones(2), kappa, small).any()
    obs, grid = on_grid_observation(small, kappa, gamma=-0.5 + 1.5j)
    res = maprt(obs, obs.x, kappa, grid, 0.0, small, n0_over_sigma2=0.0)
    y_rec = reconstruct(res.theta_hat, res.tau_hat, res.gamma_hat, obs.x, kappa, small)
    assert np.max(np.abs(y_rec - obs.y)) <= 1e-9
    g = 0.3 - 2j
    y_rec = reconstruct(0.4, 2e-7, g, obs.x, kappa, small)
    assert np.linalg.norm(y_rec) ** 2 == pytest.approx(abs(g) ** 2 * 8, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_global_phase_invariance(seed, medium):
    kappa = random_kappa(medium, seed)
    rng = np.random.default_rng(seed)
    draws = draw_batch(medium, rng, 1, t=1)
    obs = synthesize(draws[0], kappa, medium.n0, rng, medium)
    grid = grid_for(obs.truth, medium)
    k_hat = random_kappa(medium, seed + 50)
    phi = rng.uniform(-np.pi, np.pi)
    rotated = GainPhase(np.exp(1j * phi) * k_hat.kappa)
    m0 = angle_delay_map(obs, obs.x, k_hat, grid, medium).values
    m1 = angle_delay_map(obs, obs.x, rotated, grid, medium).values
    assert np.allclose(m0, m1, rtol=1e-9, atol=0)
    r0, r1 = maprt(obs, obs.x, k_hat, grid, 0, medium), maprt(obs, obs.x, rotated, grid, 0, medium)
    assert r0.argmax_indices == r1.argmax_indices
    assert r1.statistic == pytest.approx(r0.statistic, rel=1e-9)
    assert r1.gamma_hat == pytest.approx(np.exp(-1j * phi) * r0.gamma_hat, rel=1e-9)


def test_statistic_sanity_ceiling(medium):
    rng = np.random.default_rng(3)
    kappa = random_kappa(medium, 3)
    for _ in range(20):
        d = draw_batch(medium, rng, 1)[0]
        obs = synthesize(d, kappa, medium.n0, rng, medium)
        res = maprt(obs, obs.x, kappa, grid_for(d, medium), 0, medium)
        ceiling = (np.linalg.norm(kappa.kappa) * np.linalg.norm(obs.y) * np.abs(obs.x).max()
                   * np.sqrt(medium.n_subcarriers)) ** 2
        assert 0 <= res.statistic <= ceiling


@pytest.mark.parametrize("seed", range(10))
def test_off_grid_argmax_brackets_truth(seed):
    cfg = ScenarioConfig.desk(n_antennas=8, n_subcarriers=16, n_theta_grid=200, n_tau_grid=200)
    rng = np.random.default_rng(seed)
    kappa = random_kappa(cfg, seed)
    d = draw_batch(cfg, rng, 1, t=1)[0]
    obs = synthesize(d, kappa, 0.0, rng, cfg)
    grid = grid_for(d, cfg)
    i, j = maprt(obs, obs.x, kappa, grid, 0, cfg).argmax_indices
    i0 = np.searchsorted(grid.theta_axis, d.theta) - 1
    j0 = np.searchsorted(grid.tau_axis, d.tau) - 1
    assert i in (i0, i0 + 1) and j in (j0, j0 + 1)


def test_batch_map_agrees_with_single(medium):
    rng = np.random.default_rng(5)
    kappa, k_hat = random_kappa(medium, 5), random_kappa(medium, 6)
    draws = draw_batch(medium, rng, 6)
    from gpical.signal import synthesize_batch
    obs = synthesize_batch(draws, kappa, medium.n0, rng, medium)
    bmap = batch_map(obs.y, obs.x, k_hat, draws.theta_min, draws.theta_max, medium)
    stat, th, ta = maprt_batch(obs.y, obs.x, k_hat, draws.theta_min, draws.theta_max, medium)
    for b in range(6):
        single = angle_delay_map(obs[b], obs.x[b], k_hat, grid_for(draws[b], medium), medium)
        assert np.allclose(bmap.values[b], single.values, rtol=1e-10)
        res = maprt(obs[b], obs.x[b], k_hat, grid_for(draws[b], medium), 0, medium)
        assert stat[b] == pytest.approx(res.statistic, rel=1e-10)
        assert th[b] == res.theta_hat and ta[b] == res.tau_hat


def test_map_csv_round_trip(tmp_path, small):
    grid = make_grid(-0.2, 0.2, small)
    values = np.arange(35, dtype=float).reshape(5, 7)
    path = tmp_path / "map.csv"
    write_map_csv(path, AngleDelayMap(values, grid), scale=2.0)
    back = read_map_csv(path)
    assert np.array_equal(back.values, values / 2)
    assert np.array_equal(back.grid.theta_axis, grid.theta_axis)
    assert np.array_equal(back.grid.tau_axis, grid.tau_axis)
