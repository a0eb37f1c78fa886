import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superid.control import (
    PwcControl,
    check_A2,
    compose_u_of_y,
    format_control,
    g_u_eval,
    g_u_field,
    parse_control,
    project_onto_pwc,
    read_control,
    write_control,
)
from superid.problem import example1


def midpoint_integral(u, t, panels=10**6):
    """Composite midpoint rule for int_0^t of the zero-extended control.

    The panels are spread over the pieces of [0, t] cut at the breakpoints,
    so no panel straddles a jump.
    """
    lo, hi = sorted((0.0, t))
    cuts = np.unique(np.concatenate([[lo, hi], u.breakpoints[(u.breakpoints > lo) & (u.breakpoints < hi)]]))
    total = 0.0
    per_piece = max(1, panels // max(1, len(cuts) - 1))
    for a, b in zip(cuts[:-1], cuts[1:]):
        s = a + (b - a) * (np.arange(per_piece) + 0.5) / per_piece
        total += (b - a) / per_piece * np.sum(compose_u_of_y(u, s))
    return total if t >= 0 else -total


def test_g_constant():
    u = PwcControl.constant(3.0, 12, 1.0)
    assert g_u_eval(u, 0.5) == pytest.approx(0.5)
    assert g_u_eval(u, -2.0) == pytest.approx(-2.0)
    assert g_u_eval(u, 0.0) == 0.0
    t = np.linspace(-3, 3, 41)
    np.testing.assert_allclose(g_u_eval(u, t), t, atol=1e-14)


def test_g_extension_by_zero():
    u = PwcControl.constant(2.0, 4, 1.5)
    assert g_u_eval(u, 5.0) == pytest.approx(3.0)
    assert g_u_eval(u, -7.0) == pytest.approx(-3.0)


def test_g_matches_midpoint_oracle(rng):
    for _ in range(10):
        n = int(rng.integers(1, 12))
        u = PwcControl(2.5, rng.random(n) * 3)
        t = rng.uniform(-3.5, 3.5)
        assert abs(g_u_eval(u, t) - midpoint_integral(u, t)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(
    vals=st.lists(st.floats(0, 5), min_size=1, max_size=10),
    t1=st.floats(-4, 4),
    t2=st.floats(-4, 4),
)
def test_g_monotone_and_lipschitz(vals, t1, t2):
    u = PwcControl(3.0, vals)
    lo, hi = sorted((t1, t2))
    g_lo, g_hi = g_u_eval(u, lo), g_u_eval(u, hi)
    assert g_lo <= g_hi + 1e-12
    assert abs(g_hi - g_lo) <= max(vals) * (hi - lo) + 1e-12


@settings(max_examples=60, deadline=None)
@given(vals=st.lists(st.floats(-5, 5), min_size=1, max_size=10), a=st.floats(-4, 4), b=st.floats(-4, 4))
def test_g_additive_over_cells(vals, a, b):
    u = PwcControl(3.0, vals)
    knots = u.breakpoints
    lo, hi = sorted((a, b))
    overlap = np.clip(np.minimum(knots[1:], hi) - np.maximum(knots[:-1], lo), 0, None)
    expected = np.sum(overlap * u.values)
    assert g_u_eval(u, hi) - g_u_eval(u, lo) == pytest.approx(expected, abs=1e-12)


def test_g_field_zero_and_order(rng):
    u0 = PwcControl.constant(3.0, 6, 0.0)
    y = rng.uniform(-2, 2, 50)
    np.testing.assert_array_equal(g_u_field(u0, y), 0.0)
    u = PwcControl(3.0, rng.random(6))
    y2 = y + rng.random(50)
    assert np.all(g_u_field(u, y) <= g_u_field(u, y2) + 1e-15)


def test_compose_constant_and_outside():
    u = PwcControl.constant(2.0, 8, 0.7)
    y = np.array([-1.99, 0.0, 1.5, 2.0, 2.5, -2.5])
    np.testing.assert_array_equal(compose_u_of_y(u, y), [0.7, 0.7, 0.7, 0.0, 0.0, 0.0])


def test_compose_breakpoint_takes_right_cell():
    u = PwcControl(1.0, [1.0, 2.0, 3.0, 4.0])
    y = np.array([-1.0, -0.5, 0.0, 0.5])
    np.testing.assert_array_equal(compose_u_of_y(u, y), [1.0, 2.0, 3.0, 4.0])


def test_compose_matches_linear_scan(rng):
    u = PwcControl(3.0, rng.random(17))
    y = rng.uniform(-3.5, 3.5, 300)
    knots = u.breakpoints
    expected = np.zeros_like(y)
    for i, t in enumerate(y):
        for k in range(u.n_cells):
            if knots[k] <= t < knots[k + 1]:
                expected[i] = u.values[k]
                break
    np.testing.assert_array_equal(compose_u_of_y(u, y), expected)


def test_compose_representative_change_only_at_breakpoints(rng):
    u = PwcControl(1.0, rng.random(4))
    knots = u.breakpoints
    y = np.concatenate([rng.uniform(-1, 1, 20), knots[1:-1]])
    right = compose_u_of_y(u, y)
    # left-continuous representative via the mirrored grid
    mirrored = PwcControl(1.0, u.values[::-1])
    left = compose_u_of_y(mirrored, -y)
    differs = right != left
    assert np.all(np.isin(y[differs], knots))


def test_project_idempotent_on_pwc(rng):
    u = PwcControl(2.0, rng.random(8))
    for q in (1, 5, 10):
        back = project_onto_pwc(lambda s: compose_u_of_y(u, s), 2.0, 8, q)
        np.testing.assert_array_equal(back.values, u.values)


def test_project_linear_symmetric():
    for q in (1, 2, 5, 10):
        assert project_onto_pwc(lambda s: s, 1.5, 1, q).values[0] == pytest.approx(0, abs=1e-15)


def test_project_square_vs_fine_average():
    q = 5
    approx = project_onto_pwc(lambda s: s**2, 1.0, 4, q).values
    panels = 10**5
    exact = []
    for k in range(4):
        a = -1 + 0.5 * k
        s = a + 0.5 * (np.arange(panels) + 0.5) / panels
        exact.append(np.mean(s**2))
    # symmetric points integrate the linear part exactly; the quadratic part leaves h^2 (mean x_j^2 - 1/3)
    h = 0.5
    j = np.arange(1, q + 1) / (q + 1)
    rule_error = h**2 * (np.mean(j**2) - 1 / 3)
    np.testing.assert_allclose(approx - np.array(exact), rule_error, atol=1e-9)


def test_project_linear_in_v(rng):
    a, b = rng.standard_normal(2)
    f = lambda s: np.sin(s)  # noqa: E731
    g = lambda s: s**3  # noqa: E731
    lhs = project_onto_pwc(lambda s: a * f(s) + b * g(s), 2.0, 7, 5).values
    rhs = a * project_onto_pwc(f, 2.0, 7, 5).values + b * project_onto_pwc(g, 2.0, 7, 5).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_check_A2():
    p = example1(32)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ok, report = p.check_A2()
    assert ok
    with pytest.warns(UserWarning):
        ok, report = check_A2(np.full(100, 3.0))
    assert not ok and report["max_fraction"] == 1.0


def test_zero_f_rejected():
    from superid.problem import Problem

    with pytest.raises(ValueError, match="identically zero"):
        Problem.from_functions(4, 4, 1.0, 0.0, 1.0, f=lambda a, b: 0 * a, y_d=lambda a, b: a)


def test_admissible_set():
    u = PwcControl(1.0, [-0.1, 0.2])
    assert not u.is_nonnegative()
    assert u.in_admissible_set(0.5)
    assert not u.in_admissible_set(0.05)


def test_control_text_roundtrip(tmp_path, rng):
    u = PwcControl(3.0, rng.standard_normal(9))
    back = parse_control(format_control(u))
    assert back.r == u.r
    np.testing.assert_array_equal(back.values, u.values)
    write_control(tmp_path / "u.txt", u)
    np.testing.assert_array_equal(read_control(tmp_path / "u.txt").values, u.values)
    with pytest.raises(ValueError):
        parse_control("1.0 3 0.1 0.2")
