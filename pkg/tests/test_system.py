import math

import numpy as np
import pytest

from advecta.errors import EvalError, NegativeAdvance
from advecta.expr import evaluate, parse
from advecta.system import (
    AdvancedSystem, Horizon, eval_advance, eval_coefficient, eval_drift, extended_end,
    grid_points, max_advance,
)


def test_constant_coefficient():
    s = AdvancedSystem.from_strings([([[1, -2], [3, "4"]], 0)])
    np.testing.assert_array_equal(eval_coefficient(s, 0, 7.3), [[1, -2], [3, 4]])


def test_time_dependent_coefficient():
    s = AdvancedSystem.from_strings([([["t", 0], [0, 1]], "0.1")])
    np.testing.assert_array_equal(eval_coefficient(s, 0, 2.0), [[2, 0], [0, 1]])


def test_coefficient_matches_entrywise_eval():
    entries = [["sin(t)", "t^2 - 1", "exp(-t)"], ["2", "cos(3*t)", "abs(t-1)"], ["0", "max(t, 1)", "pi"]]
    s = AdvancedSystem.from_strings([(entries, "0.2")])
    ts = np.linspace(0, 3, 13)
    stacked = eval_coefficient(s, 0, ts)
    for k, t in enumerate(ts):
        single = eval_coefficient(s, 0, t)
        for a in range(3):
            for b in range(3):
                expected = evaluate(parse(entries[a][b]), t)
                assert single[a, b] == expected
                assert stacked[k, a, b] == expected


def test_coefficient_propagates_eval_error():
    s = AdvancedSystem.from_strings([([["log(t)"]], 0)])
    with pytest.raises(EvalError):
        eval_coefficient(s, 0, 0.0)


def test_drift_examples():
    s = AdvancedSystem.two_term([[1]], 0, [[2]], 0)
    np.testing.assert_array_equal(eval_drift(s, 0.0), [[-3]])
    z = AdvancedSystem.from_strings([([[0, 0], [0, 0]], 1), ([[0, 0], [0, 0]], 0)])
    np.testing.assert_array_equal(eval_drift(z, 4.0), np.zeros((2, 2)))


def test_drift_is_negated_sum_in_term_order():
    rng = np.random.default_rng(7)
    mats = [rng.normal(size=(3, 3)) for _ in range(3)]
    s = AdvancedSystem.from_strings([(m.tolist(), 0.1 * j) for j, m in enumerate(mats)])
    expected = -((mats[0] + mats[1]) + mats[2])
    np.testing.assert_array_equal(eval_drift(s, 1.0), expected)
    ts = np.linspace(0, 1, 4)
    total = eval_coefficient(s, 0, ts) + eval_coefficient(s, 1, ts) + eval_coefficient(s, 2, ts)
    np.testing.assert_array_equal(eval_drift(s, ts), -total)


def test_advance_examples():
    s = AdvancedSystem.from_strings([([[1]], "0.3"), ([[1]], "max(0, sin(t))"), ([[1]], "-1")])
    assert eval_advance(s, 0, 12.0) == 0.3
    assert eval_advance(s, 1, 3 * math.pi / 2) == 0.0
    with pytest.raises(NegativeAdvance) as info:
        eval_advance(s, 2, 0.5)
    assert info.value.term == 2


def test_advance_clamps_tiny_negatives():
    s = AdvancedSystem.from_strings([([[1]], "-1e-13")])
    assert eval_advance(s, 0, 0.0) == 0.0
    np.testing.assert_array_equal(eval_advance(s, 0, np.array([0.0, 1.0])), [0.0, 0.0])


def test_max_advance_examples():
    s = AdvancedSystem.from_strings([([[1]], "0.3"), ([[1]], "0.1")])
    assert max_advance(s, 0, 5, 0.1) == 0.3
    ramp = AdvancedSystem.from_strings([([[1]], "t")])
    assert max_advance(ramp, 0, 1, 0.1) == pytest.approx(1.0, abs=1e-15)


def test_max_advance_vs_finer_scan():
    s = AdvancedSystem.from_strings([([[1]], "0.5 + 0.4*sin(3*t)"), ([[1]], "abs(cos(t))/2")])
    dt = 0.05
    coarse = max_advance(s, 0, 4, dt)
    fine = max(float(np.max(eval_advance(s, j, np.arange(0, 4 + 1e-12, dt / 10)))) for j in range(2))
    # modulus of continuity of the first advance over one coarse step is 1.2*dt
    assert coarse <= fine + 1e-15
    assert fine - coarse <= 1.2 * dt


def test_max_advance_negative_propagates():
    s = AdvancedSystem.from_strings([([[1]], "1 - t")])
    with pytest.raises(NegativeAdvance):
        max_advance(s, 0, 2, 0.1)


def test_grid_points_lands_on_end():
    pts = grid_points(0.0, 1.0, 0.1)
    assert len(pts) == 11 and pts[-1] == pytest.approx(1.0)


def test_horizon_validation():
    with pytest.raises(ValueError):
        Horizon(1.0, 0.0)
    with pytest.raises(ValueError):
        Horizon(1.0, 0.1, extension="mirror")
    with pytest.raises(ValueError):
        Horizon(1.0, 0.3).window_steps(0.0)
    assert Horizon(1.0, 0.1).window_steps(0.0) == 10
    assert Horizon(2.0, 0.5).window_steps(2.0) == 0


def test_extended_end():
    s = AdvancedSystem.two_term([[0.5]], 0.4, [[0.3]], 0.2)
    assert extended_end(s, Horizon(10, 0.01)) == pytest.approx(11.2)
    assert extended_end(s, Horizon(10, 0.01, lookahead_depth=0)) == 10
    growing = AdvancedSystem.from_strings([([[1]], "0.1*t")])
    # the advance is re-measured on the lengthened range
    assert extended_end(growing, Horizon(1, 0.01, lookahead_depth=2)) > 1 + 2 * 0.1


def test_system_validation():
    with pytest.raises(ValueError):
        AdvancedSystem(n=1, t0=0.0, terms=())
    with pytest.raises(ValueError):
        AdvancedSystem.from_strings([([[1, 2]], 0)], n=2)


def test_systems_are_hashable_values():
    a = AdvancedSystem.two_term([[0.5]], 0.4, [[0.3]], 0.2)
    b = AdvancedSystem.from_strings([([["0.5"]], "0.4"), ([["0.3"]], "0.2")])
    assert a == b and hash(a) == hash(b)
