import io
import math

import numpy as np
import pytest

from advecta.errors import OutOfDomain, Overflow
from advecta.matrix_core import mat_exp, mat_inf_norm
from advecta.system import AdvancedSystem
from advecta.transition import check_chapman_kolmogorov, transition, write_transition_csv
from conftest import constant_drift_system, grid_for
from oracles import simpson


def smooth_2d():
    # drift D(t) = -A(t), bounded and smooth
    A = [["0.5 + 0.2*sin(t)", "-0.3*cos(2*t)"], ["0.4*sin(0.5*t)", "1 + 0.1*t/(1+t)"]]
    return AdvancedSystem.from_strings([(A, 0)])


def test_constant_drift_matches_exponential():
    D = np.array([[-0.5, 1.2], [-0.7, -1.1]])
    g = grid_for(constant_drift_system(D), 1.0, 1e-3, lookahead=0)
    assert g.size == 1001
    for k in range(0, g.size, 50):
        assert mat_inf_norm(g.phi[k] - mat_exp(D, g.times[k])) <= 1e-6


def test_zero_drift_is_identity():
    g = grid_for(constant_drift_system(np.zeros((3, 3))), 2.0, 0.01)
    assert np.all(g.phi == np.eye(3))


def test_scalar_time_varying_closed_form():
    s = AdvancedSystem.from_strings([([["1/(1+t)"]], 0)])
    g = grid_for(s, 5.0, 1e-3, lookahead=0)
    # closed form exp(int_0^t d) with the integral taken by Simpson
    for k in range(0, g.size, 500):
        t = g.times[k]
        integral = simpson(lambda u: -1 / (1 + u), 0, t, 200)
        assert g.phi[k, 0, 0] == pytest.approx(math.exp(integral), abs=1e-6)
        assert g.phi[k, 0, 0] == pytest.approx(1 / (1 + t), abs=1e-6)


def test_phi_at_t0_is_exact_identity():
    g = grid_for(smooth_2d(), 1.0, 0.01)
    assert np.array_equal(g.phi[0], np.eye(2))
    assert mat_inf_norm(np.einsum("gab,gbc->gac", g.phi, g.phi_inv) - np.eye(2)).max() <= 1e-8


def test_transition_examples():
    g = grid_for(constant_drift_system(np.diag([-1.0, -2.0])), 3.0, 1e-3, lookahead=0)
    np.testing.assert_allclose(transition(g, 1.2, 1.2), np.eye(2), atol=1e-15)
    for t, s in [(2.0, 0.5), (3.0, 1.0), (1.7, 1.6)]:
        exact = np.diag([math.exp(-(t - s)), math.exp(-2 * (t - s))])
        assert mat_inf_norm(transition(g, t, s) - exact) <= 1e-6


def test_transition_inverse_pairs():
    g = grid_for(smooth_2d(), 5.0, 1e-3, lookahead=0)
    rng = np.random.default_rng(11)
    for _ in range(50):
        t, s = rng.choice(g.times, 2)
        assert mat_inf_norm(transition(g, t, s) @ transition(g, s, t) - np.eye(2)) <= 1e-8


def test_snapping_and_domain():
    g = grid_for(constant_drift_system([[-1.0]]), 1.0, 0.1, lookahead=0)
    assert np.array_equal(transition(g, 0.5004, 0.0), transition(g, 0.5, 0.0))
    with pytest.raises(OutOfDomain):
        transition(g, 1.2, 0.0)
    with pytest.raises(OutOfDomain):
        transition(g, 0.5, -0.2)


def test_chapman_kolmogorov():
    g = grid_for(constant_drift_system([[-0.3, 0.8], [-0.8, -0.3]]), 5.0, 1e-3, lookahead=0)
    assert check_chapman_kolmogorov(g, 2.0, 2.0, 2.0) == 0.0
    rng = np.random.default_rng(12)
    for _ in range(30):
        t, s, r = rng.choice(g.times, 3)
        assert check_chapman_kolmogorov(g, t, s, r) <= 1e-8
    gv = grid_for(smooth_2d(), 10.0, 1e-3, lookahead=0)
    for _ in range(100):
        t, s, r = rng.choice(gv.times, 3)
        assert check_chapman_kolmogorov(gv, t, s, r) <= 1e-6


def test_fourth_order_refinement():
    D = np.array([[-1.0, 2.0], [-2.0, -1.0]])
    errors = []
    for dt in (0.1, 0.05, 0.025):
        g = grid_for(constant_drift_system(D), 2.0, dt, lookahead=0)
        errors.append(mat_inf_norm(g.phi[-1] - mat_exp(D, 2.0)))
    for coarse, fine in zip(errors, errors[1:]):
        assert 13 < coarse / fine < 19


def test_overflow_guard():
    with pytest.raises(Overflow):
        grid_for(constant_drift_system([[5.0]]), 10.0, 0.01, lookahead=0)


def test_grid_is_read_only():
    g = grid_for(constant_drift_system([[-1.0]]), 1.0, 0.1)
    with pytest.raises(ValueError):
        g.phi[1, 0, 0] = 3.0


def test_lookahead_extends_grid():
    s = AdvancedSystem.two_term([[0.5]], 0.4, [[0.3]], 0.2)
    g = grid_for(s, 2.0, 0.01)
    assert g.window == 200
    assert g.t_ext == pytest.approx(3.2)
    assert g.T == pytest.approx(2.0)


def test_csv_dump():
    g = grid_for(constant_drift_system(np.diag([-1.0, -2.0])), 0.2, 0.1, lookahead=0)
    buf = io.StringIO()
    write_transition_csv(g, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,phi_11,phi_12,phi_21,phi_22"
    assert lines[1] == "0.0,1.0,0.0,0.0,1.0"
    assert len(lines) == 4
    row = [float(v) for v in lines[3].split(",")]
    assert row[1] == pytest.approx(math.exp(-0.2), abs=1e-6)
