import math

import numpy as np
import pytest

from koopman.exceptions import InputError
from koopman.observables import (
    Dictionary,
    build_dictionary,
    parse_expression,
    projection_matrix,
    project,
)

PENDULUM_N6 = ["x1", "x2", "sin(x1)", "cos(x1)*x2", "sin(x1)*x2^2", "sin(x1)*cos(x1)"]
DUFFING_N6 = ["x1", "x2", "x1^3", "x1^2*x2", "x1^5", "x1*x2^2"]


def test_expression_parse_render_round_trip():
    cases = [
        "x1",
        "sin(x1)*x2^2",
        "sgn(x2)*abs(0.5*x2^2 + 3*cos(x1))",
        "x1^3 + -2*x2",
        "cos(x1)*cos(x1)",
    ]
    for text in cases:
        expr = parse_expression(text)
        again = parse_expression(expr.render())
        assert again.render() == expr.render()


def test_expression_evaluation_matches_numpy():
    expr = parse_expression("sin(x1)*x2^2 + 0.5*cos(x1)")
    rng = np.random.default_rng(11)
    x = rng.uniform(-3, 3, size=(2, 50))
    expected = np.sin(x[0]) * x[1] ** 2 + 0.5 * np.cos(x[0])
    assert np.allclose(expr.evaluate(x), expected, rtol=0, atol=1e-14)


def test_parse_rejects_garbage():
    for bad in ["", "x0", "x1 +", "sin()", "foo(x1)", "x1^-2", "x1^(1,2)", "(x1"]:
        with pytest.raises(InputError):
            parse_expression(bad)


def test_pendulum_n6_is_the_published_dictionary():
    d = build_dictionary("pendulum", 6)
    assert d.labels == PENDULUM_N6
    assert d.identity_prefix


def test_duffing_n6_is_the_published_dictionary():
    d = build_dictionary("duffing", 6)
    assert d.labels == DUFFING_N6
    assert d.identity_prefix


def test_pendulum_eval_at_origin_is_zero():
    d = build_dictionary("pendulum", 6)
    assert np.array_equal(d.eval(np.zeros(2)), np.zeros(6))


def test_pendulum_eval_at_quarter_turn():
    # sin(pi/2)=1 and cos(pi/2) is 0 up to float eps
    d = build_dictionary("pendulum", 6)
    z = d.eval(np.array([math.pi / 2, 1.0]))
    assert z[0] == pytest.approx(math.pi / 2, abs=0)
    assert z[1] == 1.0
    assert z[2] == pytest.approx(1.0, abs=1e-15)
    assert abs(z[3]) <= 1e-15
    assert z[4] == pytest.approx(1.0, abs=1e-15)
    assert abs(z[5]) <= 1e-15


def test_duffing_eval_hand_values():
    d = build_dictionary("duffing", 6)
    z = d.eval(np.array([2.0, -1.0]))
    assert np.array_equal(z, np.array([2.0, -1.0, 8.0, -4.0, 32.0, 2.0]))


def test_golf_dictionary_is_fixed_size_four():
    d = build_dictionary("golf", 4)
    assert d.labels[:3] == ["x1", "x2", "sin(x1)"]
    assert "sgn(x2)" in d.labels[3] and "abs(" in d.labels[3]
    with pytest.raises(InputError):
        build_dictionary("golf", 6)


def test_golf_friction_observable_values():
    d = build_dictionary("golf", 4)
    # m*a = 0.24643182, m*g = 5.141421; x=(0,1) -> |m*a + m*g| = 5.38785...
    z = d.eval(np.array([0.0, 1.0]))
    assert z[3] == pytest.approx(0.24643182 + 5.141421, rel=1e-9)
    z = d.eval(np.array([0.0, -1.0]))
    assert z[3] == pytest.approx(-(0.24643182 + 5.141421), rel=1e-9)
    z = d.eval(np.array([0.3, 0.0]))
    assert z[3] == 0.0  # sgn(0) = 0


def test_identity_dictionary():
    d = build_dictionary("identity", 3, state_dim=3)
    assert d.labels == ["x1", "x2", "x3"]
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(d.eval(x), x)


def test_polynomial_dictionary_orders_by_degree():
    d = build_dictionary("polynomial", 5, state_dim=2)
    assert d.labels[:2] == ["x1", "x2"]
    assert all("^2" in lbl or "*" in lbl for lbl in d.labels[2:])


def test_larger_generated_dictionaries_extend_smaller_ones():
    # truncation consistency: the N=6 list is a prefix of the N=12 list
    small = build_dictionary("pendulum", 6).labels
    large = build_dictionary("pendulum", 12).labels
    assert large[:6] == small
    small = build_dictionary("duffing", 6).labels
    large = build_dictionary("duffing", 20).labels
    assert large[:6] == small


def test_build_dictionary_determinism():
    a = build_dictionary("pendulum", 24)
    b = build_dictionary("pendulum", 24)
    assert a.labels == b.labels
    rng = np.random.default_rng(3)
    x = rng.uniform(-2, 2, size=(2, 8))
    assert np.array_equal(a.lift(x), b.lift(x))


def test_dictionary_dedup_on_random_states():
    rng = np.random.default_rng(7)
    for system, size in [("pendulum", 24), ("duffing", 20), ("golf", 4)]:
        d = build_dictionary(system, size)
        x = rng.uniform(-1.5, 1.5, size=(2, size + 10))
        z = d.lift(x)
        for i in range(size):
            for j in range(i + 1, size):
                assert not np.allclose(z[i], z[j], rtol=0, atol=1e-12), (
                    system, d.labels[i], d.labels[j])


def test_lift_matches_columnwise_eval():
    d = build_dictionary("pendulum", 6)
    rng = np.random.default_rng(21)
    x = rng.uniform(-3, 3, size=(2, 3))
    z = d.lift(x)
    for j in range(3):
        assert np.array_equal(z[:, j], d.eval(x[:, j]))


def test_lift_identity_returns_input():
    d = build_dictionary("identity", 2, state_dim=2)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 9))
    assert np.array_equal(d.lift(x), x)


def test_lift_rejects_bad_shapes_and_nonfinite():
    d = build_dictionary("pendulum", 6)
    with pytest.raises(InputError):
        d.lift(np.zeros((3, 4)))
    with pytest.raises(InputError):
        d.eval(np.array([np.nan, 0.0]))


def test_projection_round_trip_on_random_states():
    d = build_dictionary("pendulum", 12)
    p = projection_matrix(d)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.uniform(-3, 3, size=2)
        z = d.eval(x)
        assert np.array_equal(project(p, z), x)


def test_project_plain_slice():
    d = build_dictionary("pendulum", 6)
    p = projection_matrix(d)
    z = np.array([1.0, 2, 3, 4, 5, 6])
    assert np.array_equal(project(p, z), np.array([1.0, 2.0]))
    with pytest.raises(InputError):
        project(p, z[:4])


def test_build_dictionary_input_validation():
    with pytest.raises(InputError):
        build_dictionary("pendulum", 1)
    with pytest.raises(InputError):
        build_dictionary("unknown_system", 6)
    with pytest.raises(InputError):
        Dictionary.from_expressions(["x1", "x1"], 1)  # duplicate entries
    with pytest.raises(InputError):
        Dictionary.from_expressions(["x1"], 2)  # N < n


def test_dictionary_expression_round_trip():
    d = build_dictionary("golf", 4)
    rebuilt = Dictionary.from_expressions(d.expressions(), d.state_dim)
    rng = np.random.default_rng(13)
    x = rng.uniform(-1, 1, size=(2, 6))
    assert np.array_equal(d.lift(x), rebuilt.lift(x))
