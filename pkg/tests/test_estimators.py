import json
import pathlib

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dasdoa.arrays import build_dictionary, uniform_line_array
from dasdoa.errors import ConfigError, DegenerateInputError
from dasdoa.estimators import SolverConfig, SpatialSpectrum, cbf_spectrum, \
    kkt_residual, music_spectrum, objective_value, peak_pick, qspice_solve, \
    spice_solve, spice_weights

DATA = pathlib.Path(__file__).parent / "data"


def _oracle_instances():
    with open(DATA / "qspice_oracle.json") as fh:
        blob = json.load(fh)
    for inst in blob["instances"]:
        z = np.array(inst["z_re"]) + 1j * np.array(inst["z_im"])
        ang = np.deg2rad(np.array(inst["angles_deg"]))
        a = np.exp(-1j * np.pi * np.arange(blob["M"])[:, None] * np.sin(ang)[None, :])
        yield z, a, inst["r"], inst["q"], inst["oracle_objective"]


def test_solver_reaches_oracle_objective_single_instance():
    z, a, r, q, oracle = next(_oracle_instances())
    cfg = SolverConfig(r=r, q=q, max_iter=20000, rel_tol=1e-16)
    res = qspice_solve(z, a, cfg)
    obj = objective_value(res.powers.signal, res.powers.noise, z, a, cfg)
    assert obj == pytest.approx(oracle, rel=1e-9)
    assert res.converged


def test_scalar_instance_closed_form():
    # M = 2, single atom a = (1, 1)/sqrt(2), R_hat = I. With tr(R_hat) = 2
    # all weights are 1/2 and the objective splits into two independent
    # eigen-modes min_x 1/x + x/2 = sqrt(2) each, so the optimum is 2*sqrt(2).
    a = np.array([[1.0], [1.0]]) / np.sqrt(2)
    r_hat = np.eye(2, dtype=complex)
    res = qspice_solve(r_hat, a, SolverConfig(r=1, q=1, max_iter=20000,
                                              rel_tol=1e-16))
    obj = objective_value(res.powers.signal, res.powers.noise, r_hat, a,
                          SolverConfig(r=1, q=1))
    # the p/sigma_1 split is non-unique here, which makes the tail of the
    # iteration sublinear; the objective itself is still pinned
    assert obj == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-8)


def test_objective_trace_non_increasing():
    rng = np.random.default_rng(20)
    for _ in range(25):
        m, g = 4, 12
        a = np.exp(-1j * np.pi * np.arange(m)[:, None]
                   * np.sin(np.linspace(-1.2, 1.2, g))[None, :])
        y = (rng.standard_normal((m, 30)) + 1j * rng.standard_normal((m, 30)))
        r_hat = y @ y.conj().T / 30
        q = rng.choice([1.0, 1.5, 2.0])
        res = qspice_solve(r_hat, a, SolverConfig(r=1.0, q=q, max_iter=60,
                                                  rel_tol=1e-16))
        tr = np.asarray(res.trace)
        assert np.all(np.diff(tr) <= 1e-12 * np.abs(tr[:-1]))


def test_solution_scale_equivariance():
    rng = np.random.default_rng(21)
    m, g = 5, 15
    a = np.exp(-1j * np.pi * np.arange(m)[:, None]
               * np.sin(np.linspace(-1.0, 1.0, g))[None, :])
    y = rng.standard_normal((m, 40)) + 1j * rng.standard_normal((m, 40))
    r_hat = y @ y.conj().T / 40
    cfg = SolverConfig(r=1.0, q=2.0, max_iter=4000, rel_tol=1e-14)
    base = qspice_solve(r_hat, a, cfg)
    scaled = qspice_solve(7.0 * r_hat, a, cfg)
    assert_allclose(scaled.powers.signal, 7.0 * base.powers.signal,
                    rtol=1e-6, atol=1e-9 * base.powers.signal.max())
    assert_allclose(scaled.powers.noise, 7.0 * base.powers.noise, rtol=1e-6)


def test_warm_start_from_own_solution_converges_immediately():
    z, a, r, q, _ = next(_oracle_instances())
    cfg = SolverConfig(r=r, q=q, max_iter=20000, rel_tol=1e-16)
    cold = qspice_solve(z, a, cfg)
    warm = qspice_solve(z, a, SolverConfig(r=r, q=q, max_iter=500, rel_tol=1e-10),
                        init=(cold.powers.signal, cold.powers.noise))
    assert warm.n_iter <= 3
    assert_allclose(warm.powers.signal, cold.powers.signal,
                    rtol=1e-6, atol=1e-12 * cold.powers.signal.max())


def test_warm_start_validation():
    z, a, *_ = next(_oracle_instances())
    m, g = a.shape
    with pytest.raises(ConfigError):
        qspice_solve(z, a, init=(np.ones(g + 1), np.ones(m)))
    with pytest.raises(ConfigError):
        qspice_solve(z, a, init=(-np.ones(g), np.ones(m)))
    with pytest.raises(ConfigError):
        qspice_solve(z, a, init=(np.zeros(g), np.zeros(m)))
    with pytest.raises(ConfigError):
        qspice_solve(z, a, init=(np.full(g, np.nan), np.ones(m)))


def test_kkt_residual_small_at_solution():
    for z, a, r, q, _ in _oracle_instances():
        res = qspice_solve(z, a, SolverConfig(r=r, q=q, max_iter=20000,
                                              rel_tol=1e-16))
        kkt = kkt_residual(res.powers.signal, res.powers.noise, z, a,
                           SolverConfig(r=r, q=q))
        assert kkt < 1e-6


def test_spice_solve_is_r1_q1():
    z, a, *_ = next(_oracle_instances())
    res1 = spice_solve(z, a, max_iter=500, rel_tol=1e-12)
    res2 = qspice_solve(z, a, SolverConfig(r=1.0, q=1.0, max_iter=500,
                                           rel_tol=1e-12))
    assert_allclose(res1.powers.signal, res2.powers.signal)


def test_spice_weights_convention():
    a = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex)
    r_hat = 2.0 * np.eye(2, dtype=complex)
    w_p, w_s = spice_weights(a, r_hat)
    assert_allclose(w_p, [2.0 / 4.0, 2.0 / 4.0])   # ||a_g||^2 / tr
    assert_allclose(w_s, [0.25, 0.25])             # 1 / tr


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(r=0.5)
    with pytest.raises(ConfigError):
        SolverConfig(q=2.5)
    with pytest.raises(ConfigError):
        SolverConfig(q=0.9)
    with pytest.raises(ConfigError):
        SolverConfig(max_iter=0)


def test_degenerate_covariance_rejected():
    a = np.ones((3, 4), dtype=complex)
    with pytest.raises(DegenerateInputError):
        qspice_solve(np.zeros(3, dtype=complex), a)
    with pytest.raises(DegenerateInputError):
        qspice_solve(np.zeros((3, 3), dtype=complex), a)
    with pytest.raises(ConfigError):
        qspice_solve(np.full((3, 3), np.nan + 0j), a)


def test_dictionary_shape_mismatch_rejected():
    a = np.ones((3, 4), dtype=complex)
    with pytest.raises(ConfigError):
        qspice_solve(np.eye(4, dtype=complex), a)


def test_cbf_flat_for_identity_covariance():
    geom = uniform_line_array(5, spacing=0.25)
    dic = build_dictionary(geom, 3000.0, (-60.0, 60.0), 1.0)
    spec = cbf_spectrum(np.eye(5, dtype=complex), dic)
    assert spec.estimator == "cbf"
    assert_allclose(spec.power, 1.0 / 5.0, atol=1e-12)


def test_music_recovers_on_grid_sources():
    geom = uniform_line_array(12, spacing=0.25)
    dic = build_dictionary(geom, 3000.0, (-90.0, 90.0), 0.5)
    truth = np.array([-20.0, 14.5])
    idx = [int(np.argmin(np.abs(dic.angles - t))) for t in truth]
    a_true = dic.matrix[:, idx]
    r = a_true @ a_true.conj().T + 0.01 * np.eye(12)
    spec = music_spectrum(r, dic, 2)
    est, shortfall = peak_pick(spec, 2)
    assert not shortfall
    assert_allclose(est, truth, atol=1e-9)


def test_music_k_validation():
    geom = uniform_line_array(4, spacing=0.25)
    dic = build_dictionary(geom, 3000.0, (-10.0, 10.0), 1.0)
    with pytest.raises(ConfigError):
        music_spectrum(np.eye(4, dtype=complex), dic, 0)
    with pytest.raises(ConfigError):
        music_spectrum(np.eye(4, dtype=complex), dic, 4)


def _spectrum(power, start=0.0, step=1.0):
    power = np.asarray(power, dtype=float)
    angles = start + step * np.arange(power.size)
    return SpatialSpectrum(angles, power, "test")


def test_peak_pick_plateau_takes_left_edge():
    est, shortfall = peak_pick(_spectrum([1.0, 2.0, 2.0, 1.0]), 1)
    assert not shortfall
    assert_allclose(est, [1.0])


def test_peak_pick_equal_peaks_sorted_by_angle():
    est, shortfall = peak_pick(_spectrum([0, 3, 0, 3, 0]), 2)
    assert not shortfall
    assert_allclose(est, [1.0, 3.0])


def test_peak_pick_guard_suppresses_near_duplicates():
    spec = _spectrum([0, 5, 4.9, 0, 0, 3, 0], step=0.5)
    est, shortfall = peak_pick(spec, 2, guard_deg=1.0)
    assert not shortfall
    assert_allclose(est, [0.5, 2.5])


def test_peak_pick_shortfall_flag():
    est, shortfall = peak_pick(_spectrum([0, 1, 0, 0]), 2)
    assert shortfall
    assert_allclose(est, [1.0])


def test_peak_pick_validation():
    with pytest.raises(ConfigError):
        peak_pick(_spectrum([0, 1, 0]), 0)
    with pytest.raises(ConfigError):
        peak_pick(_spectrum([0, 1, 0]), 1, guard_deg=-1.0)


def test_spatial_spectrum_db_floor():
    spec = _spectrum([1.0, 0.0])
    db = spec.power_db
    assert db[0] == 0.0
    assert np.isfinite(db[1])
