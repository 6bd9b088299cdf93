import numpy as np
import pytest

from pinvcontrol.dynamics import (
    OscillatorControlProblem,
    OscillatorModel,
    adjoint,
    energy,
    gradient,
    propagate,
)
from pinvcontrol.errors import DivergenceError
from pinvcontrol.io import read_columns
from pinvcontrol.waveforms import TimeGrid

GRID = TimeGrid(15.0, 1500)
Z0 = (2**-0.5, 2**-0.5)
MODEL = OscillatorModel()


def central_difference(problem, u, k, step=1e-6):
    up, um = u.copy(), u.copy()
    up[k] += step
    um[k] -= step
    return (problem.cost(up) - problem.cost(um)) / (2 * step)


@pytest.mark.parametrize(
    "state, model, expected",
    [
        (Z0, MODEL, 0.5),
        ((0.0, 0.0), MODEL, 0.0),
        ((1.0, 0.0), OscillatorModel(m=2.0, omega0=3.0), 9.0),
    ],
)
def test_energy(state, model, expected):
    assert energy(model, state) == pytest.approx(expected, rel=1e-15)


def test_model_validation():
    with pytest.raises(ValueError):
        OscillatorModel(m=0.0)


def test_free_motion_conserves_energy():
    traj = propagate(MODEL, np.zeros(GRID.N), Z0, GRID)
    E = traj.energies(MODEL)
    assert np.abs(E - 0.5).max() < 1e-8
    np.testing.assert_array_equal(traj.states[0], Z0)


def test_free_motion_is_cosine():
    traj = propagate(MODEL, np.zeros(GRID.N), (1.0, 0.0), GRID)
    t = GRID.state_times
    np.testing.assert_allclose(traj.q, np.cos(t), atol=1e-8)
    np.testing.assert_allclose(traj.p, -np.sin(t), atol=1e-8)


def test_origin_is_fixed_point():
    u = np.random.default_rng(0).standard_normal(GRID.N)
    traj = propagate(MODEL, u, (0.0, 0.0), GRID)
    np.testing.assert_array_equal(traj.states, 0.0)


def test_linear_in_initial_state():
    u = 0.3 * np.random.default_rng(1).standard_normal(GRID.N)
    a = propagate(MODEL, u, (0.2, -0.4), GRID).states
    b = propagate(MODEL, u, (0.6, -1.2), GRID).states
    np.testing.assert_allclose(b, 3 * a, rtol=1e-12, atol=1e-14)


def test_divergence_reports_time():
    u = np.full(GRID.N, -1e6)
    with pytest.raises(DivergenceError) as err:
        propagate(MODEL, u, Z0, GRID)
    assert 0 < err.value.time <= GRID.tau


def test_bad_control_length():
    with pytest.raises(ValueError):
        propagate(MODEL, np.zeros(10), Z0, GRID)


def test_adjoint_boundary_condition():
    u = 0.2 * np.random.default_rng(2).standard_normal(GRID.N)
    traj = propagate(MODEL, u, Z0, GRID)
    adj = adjoint(MODEL, traj, u)
    np.testing.assert_array_equal(adj.costates[-1], traj.final)


def test_adjoint_zero_terminal_state():
    u = np.random.default_rng(3).standard_normal(GRID.N)
    traj = propagate(MODEL, u, (0.0, 0.0), GRID)
    adj = adjoint(MODEL, traj)
    np.testing.assert_array_equal(adj.costates, 0.0)
    np.testing.assert_array_equal(gradient(MODEL, traj, adj), 0.0)


def test_adjoint_free_motion_analytic():
    # choose z0 so that the free trajectory ends at (1, 0): z0 = (cos tau, sin tau)
    tau = GRID.tau
    traj = propagate(MODEL, np.zeros(GRID.N), (np.cos(tau), np.sin(tau)), GRID)
    np.testing.assert_allclose(traj.final, (1.0, 0.0), atol=1e-8)
    adj = adjoint(MODEL, traj)
    t = GRID.state_times
    np.testing.assert_allclose(adj.lam_q, np.cos(tau - t), atol=1e-8)
    np.testing.assert_allclose(adj.lam_p, np.sin(tau - t), atol=1e-8)


def test_adjoint_rejects_other_control():
    traj = propagate(MODEL, np.zeros(GRID.N), Z0, GRID)
    with pytest.raises(ValueError):
        adjoint(MODEL, traj, np.ones(GRID.N))


def test_adjoint_forward_consistency():
    # lam_k . z_k is invariant under the exact discrete adjoint; re-propagating
    # from any stored state must reproduce the terminal costate
    u = 0.3 * np.random.default_rng(4).standard_normal(GRID.N)
    traj = propagate(MODEL, u, Z0, GRID)
    adj = adjoint(MODEL, traj)
    pairing = np.sum(adj.costates * traj.states, axis=1)
    np.testing.assert_allclose(pairing, pairing[-1], rtol=1e-10)
    k = GRID.N // 3
    sub = TimeGrid(GRID.tau - GRID.state_times[k], GRID.N - k)
    rerun = propagate(MODEL, u[k:], traj.states[k], sub)
    np.testing.assert_allclose(rerun.final, adj.costates[-1], atol=1e-8)


def test_gradient_zero_state():
    problem = OscillatorControlProblem(z0=(0.0, 0.0))
    _, g = problem(np.random.default_rng(5).standard_normal(GRID.N))
    np.testing.assert_array_equal(g, 0.0)


def test_gradient_leading_order_structure():
    # to first order in dt the gradient is -dt * lam_p * q
    problem = OscillatorControlProblem()
    u = np.zeros(GRID.N)
    traj = problem.trajectory(u)
    adj = adjoint(MODEL, traj)
    g = gradient(MODEL, traj, adj)
    approx = -GRID.dt * adj.lam_p[1:] * traj.q[:-1]
    assert np.abs(g - approx).max() < 0.02 * np.abs(g).max()


def test_gradient_at_zero_control_matches_finite_differences():
    problem = OscillatorControlProblem()
    u = np.zeros(GRID.N)
    _, g = problem(u)
    for k in np.random.default_rng(6).integers(0, GRID.N, 5):
        fd = central_difference(problem, u, k)
        assert abs(g[k] - fd) / max(abs(fd), 1e-12) < 1e-5


def test_gradient_finite_difference_random_controls():
    rng = np.random.default_rng(7)
    problem = OscillatorControlProblem()
    worst = 0.0
    for _ in range(4):
        u = 0.2 * rng.standard_normal(GRID.N)
        _, g = problem(u)
        for k in rng.integers(0, GRID.N, 5):
            fd = central_difference(problem, u, k)
            worst = max(worst, abs(g[k] - fd) / max(abs(fd), 1e-12))
    assert worst < 1e-4


def test_gradient_nonunit_parameters():
    model = OscillatorModel(m=1.7, omega0=0.6)
    problem = OscillatorControlProblem(model, TimeGrid(10.0, 800), z0=(0.4, -0.9))
    u = 0.1 * np.random.default_rng(8).standard_normal(800)
    _, g = problem(u)
    for k in (3, 250, 799):
        fd = central_difference(problem, u, k)
        assert abs(g[k] - fd) / max(abs(fd), 1e-12) < 1e-5


def test_trajectory_csv(tmp_path):
    traj = propagate(MODEL, np.zeros(GRID.N), Z0, GRID)
    cols = read_columns(traj.to_csv(tmp_path / "traj.csv", MODEL))
    assert list(cols) == ["t", "q", "p", "E"]
    np.testing.assert_array_equal(cols["q"], traj.q)
    np.testing.assert_array_equal(cols["E"], traj.energies(MODEL))
