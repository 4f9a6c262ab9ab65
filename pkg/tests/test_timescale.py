import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tshobam.errors import EmptyWindow, NonRegressive, NotInScale
from tshobam.timescale import (
    Regressivity, TimeScale, circle_minus, delta_derivative, delta_integral, enumerate_grid,
    exp_along, forward_jump, graininess, is_regressive, project_backward, project_forward, ts_exp,
)

Z = TimeScale.uniform_grid(1)
R = TimeScale.continuum(1e-3)
U11 = TimeScale.periodic_union(1, 1, 0, 0.5)


class TestJumps:
    def test_grid_forward_jump(self):
        assert forward_jump(Z, 3) == 4

    def test_continuum_forward_jump_is_identity(self):
        assert forward_jump(R, 2.5) == 2.5

    def test_union_segment_end_jumps_over_gap(self):
        assert forward_jump(U11, 1) == 2

    def test_graininess_values(self):
        assert graininess(TimeScale.uniform_grid(0.5), 1) == 0.5
        assert graininess(R, 17.3) == 0.0
        assert graininess(TimeScale.periodic_union(1, 2, 0), 1) == 2
        assert graininess(U11, 0.5) == 0.0

    def test_non_member_rejected(self):
        with pytest.raises(NotInScale):
            forward_jump(Z, 0.5)
        with pytest.raises(NotInScale):
            graininess(U11, 1.5)

    def test_projections(self):
        assert project_backward(Z, 2.7) == 2
        assert project_backward(R, 2.7) == 2.7
        assert project_backward(U11, 1.5) == 1
        assert project_forward(U11, 1.5) == 2
        assert project_forward(Z, 2.2) == 3

    def test_degenerate_unions(self):
        assert TimeScale.periodic_union(0, 2).kind == "grid"
        assert TimeScale.periodic_union(3, 0).kind == "continuum"

    def test_sup_graininess(self):
        assert Z.sup_graininess == 1.0
        assert R.sup_graininess == 0.0
        assert TimeScale.periodic_union(1, 3).sup_graininess == 3.0

    @given(st.floats(-50, 50), st.integers(-5, 5))
    def test_union_shift_closure(self, t, k):
        ts = TimeScale.periodic_union(1.5, 0.5, 0.25)
        s = ts.project_backward(t)
        assert ts.contains(s)
        assert ts.contains(s + k * ts.period)


class TestEnumerate:
    def test_grid(self):
        assert [p.t for p in enumerate_grid(Z, 0, 3)] == [0, 1, 2, 3]

    def test_continuum(self):
        pts = enumerate_grid(TimeScale.continuum(0.5), 0, 1)
        assert [p.t for p in pts] == [0, 0.5, 1]
        assert not any(p.is_right_scattered for p in pts)

    def test_union(self):
        pts = enumerate_grid(U11, 0, 2.5)
        assert [p.t for p in pts] == [0, 0.5, 1, 2, 2.5]
        assert [p.is_right_scattered for p in pts] == [False, False, True, False, False]
        assert pts[2].graininess == 1.0

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            enumerate_grid(Z, 0.2, 0.8)
        with pytest.raises(EmptyWindow):
            enumerate_grid(TimeScale.periodic_union(1, 2), 1.2, 2.8)


class TestIntegralAndDerivative:
    def test_grid_integral_is_finite_sum(self):
        assert delta_integral(Z, lambda t: t, 0, 3) == 3

    def test_continuum_integral(self):
        assert delta_integral(R, lambda t: t, 0, 3) == pytest.approx(4.5, rel=1e-9)

    def test_zero_integrand(self):
        assert delta_integral(U11, lambda t: 0 * t, 0, 7) == 0

    def test_endpoints_project_up(self):
        # [0.5, 3.2] on Z is [1, 4): 1 + 2 + 3
        assert delta_integral(Z, lambda t: t, 0.5, 3.2) == 6

    def test_union_integral(self):
        # [0,1] dense plus the jump at 1 (value 1, graininess 1) plus [2,3] dense
        ts = TimeScale.periodic_union(1, 1, 0, 1e-3)
        assert delta_integral(ts, lambda t: t, 0, 3) == pytest.approx(0.5 + 1 + 2.5, rel=1e-9)

    def test_vector_integrand(self):
        v = delta_integral(Z, lambda t: np.column_stack([t, 2 * t]) if np.ndim(t) else [t, 2 * t], 0, 3)
        assert np.allclose(v, [3, 6])

    def test_reversed_window(self):
        with pytest.raises(EmptyWindow):
            delta_integral(Z, lambda t: t, 3, 0)

    def test_derivatives(self):
        assert delta_derivative(Z, lambda t: t ** 2, 2) == 5
        assert delta_derivative(R, lambda t: t ** 2, 2) == pytest.approx(4, abs=1e-6)
        assert delta_derivative(U11, lambda t: 7.0, 1) == 0


class TestRegressivity:
    def test_classes(self):
        assert is_regressive(R, lambda t: -5 + 0 * t, (0, 10)) == Regressivity.POSITIVELY_REGRESSIVE
        assert is_regressive(Z, lambda t: -1 + 0 * t, (0, 10)) == Regressivity.NEITHER
        assert is_regressive(Z, lambda t: -0.5 + 0 * t, (0, 10)) == Regressivity.POSITIVELY_REGRESSIVE
        assert is_regressive(Z, lambda t: -3 + 0 * t, (0, 10)) == Regressivity.REGRESSIVE

    def test_circle_minus(self):
        assert circle_minus(R, 0.4)(3.0) == -0.4
        assert circle_minus(Z, 1.0)(2.0) == -0.5
        assert circle_minus(U11, 0.0)(1.0) == 0.0
        with pytest.raises(NonRegressive):
            circle_minus(Z, -1.0)(0.0)


class TestExponential:
    def test_identity_at_equal_times(self):
        assert ts_exp(U11, 0.3, 1.0, 1.0) == 1.0

    def test_grid_product(self):
        assert ts_exp(Z, 0.1, 5, 0) == pytest.approx(1.61051, rel=1e-12)

    def test_continuum_exponential(self):
        assert ts_exp(R, -0.73, 1, 0) == pytest.approx(math.exp(-0.73), rel=1e-9)

    def test_inverse_for_reversed_times(self):
        assert ts_exp(Z, 0.1, 0, 5) == pytest.approx(1 / 1.61051, rel=1e-12)

    def test_sign_flip_on_grid(self):
        assert ts_exp(Z, -3.0, 3, 0) == pytest.approx((-2.0) ** 3)

    def test_nonregressive(self):
        with pytest.raises(NonRegressive):
            ts_exp(Z, -1.0, 3, 0)

    def test_circle_minus_inverts(self):
        ts = TimeScale.periodic_union(1, 0.5, 0, 1e-3)
        p = lambda t: 0.3 + 0.1 * np.sin(t)
        a = ts_exp(ts, p, 4.5, 0)
        b = ts_exp(ts, circle_minus(ts, p), 4.5, 0)
        assert a * b == pytest.approx(1.0, rel=1e-9)

    def test_exp_along_matches_pointwise(self):
        t, mu = U11.with_resolution(1e-3).grid_arrays(0, 4)
        e = exp_along(t, mu, 0.2)
        k = np.searchsorted(t, 3.0)
        assert e[k] == pytest.approx(ts_exp(U11.with_resolution(1e-3), 0.2, 3.0, 0.0), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.9), st.integers(0, 10), st.integers(0, 10))
    def test_grid_delta_derivative_law(self, p, s, d):
        t = s + d
        lhs = (ts_exp(Z, p, t + 1, s) - ts_exp(Z, p, t, s)) / 1.0
        assert lhs == pytest.approx(p * ts_exp(Z, p, t, s), rel=1e-9)


# -- randomized property suites ----------------------------------------------------

SCALES = [Z, TimeScale.uniform_grid(0.5), TimeScale.continuum(1e-2),
          TimeScale.periodic_union(1, 1, 0, 1e-2), TimeScale.periodic_union(0.5, 1.5, 0.25, 1e-2)]
CASES = 200


def _grid_points(ts, rng, k, lo=-5.0, hi=15.0):
    """k sorted points of ts drawn from its own grid on [lo, hi]."""
    t, _ = ts.grid_arrays(ts.project_forward(lo), ts.project_backward(hi))
    return np.sort(rng.choice(t, size=k))


def _random_p(rng, lo=-0.5, hi=0.5):
    """a + b sin(w t + c) with 1 + mu p > 0 for mu <= 1.5 when lo >= -0.5."""
    a, b = rng.uniform(lo, hi), rng.uniform(-0.15, 0.15)
    w, c = rng.uniform(0.2, 2), rng.uniform(0, 6)
    return lambda t: a + b * np.sin(w * np.asarray(t) + c)


def _each_case(seed):
    rng = np.random.default_rng(seed)
    for k in range(CASES):
        yield rng, SCALES[k % len(SCALES)]


def test_semigroup_law():
    for rng, ts in _each_case(1):
        p = _random_p(rng)
        r, s, t = _grid_points(ts, rng, 3)
        whole = ts_exp(ts, p, t, r)
        assert abs(ts_exp(ts, p, t, s) * ts_exp(ts, p, s, r) - whole) <= 1e-9 * abs(whole)


def test_positivity():
    for rng, ts in _each_case(2):
        p = _random_p(rng)
        s, t = rng.permutation(_grid_points(ts, rng, 2))
        assert ts_exp(ts, p, t, s) > 0


def test_monotone_comparison():
    for rng, ts in _each_case(3):
        p = _random_p(rng)
        d = rng.uniform(0, 0.3)
        q = lambda t, p=p, d=d: p(t) + d
        s, t = _grid_points(ts, rng, 2)
        assert ts_exp(ts, p, t, s) <= ts_exp(ts, q, t, s) * (1 + 1e-9)


def test_identity_at_equal_times_randomized():
    for rng, ts in _each_case(4):
        (t,) = _grid_points(ts, rng, 1)
        assert ts_exp(ts, _random_p(rng, -3, 3), t, t) == 1.0


def test_nonnegative_rate_grows():
    for rng, ts in _each_case(5):
        p = lambda t, a=rng.uniform(0.15, 1): a + 0.15 * np.sin(t)
        s, t = _grid_points(ts, rng, 2)
        assert ts_exp(ts, p, t, s) >= 1.0


def test_fundamental_identity_on_grid():
    rng = np.random.default_rng(6)
    for _ in range(CASES):
        p = _random_p(rng)
        a, b = (int(v) for v in np.sort(rng.integers(-10, 20, size=2)))
        c = int(rng.integers(-10, 20))
        lhs = delta_integral(Z, np.vectorize(lambda t: p(t) * ts_exp(Z, p, c, t + 1)), a, b)
        rhs = ts_exp(Z, p, c, a) - ts_exp(Z, p, c, b)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_integral_additivity():
    for rng, ts in _each_case(7):
        f = _random_p(rng, -2, 2)
        a, b, c = _grid_points(ts, rng, 3)
        whole = delta_integral(ts, f, a, c)
        parts = delta_integral(ts, f, a, b) + delta_integral(ts, f, b, c)
        assert abs(parts - whole) <= 1e-9 * max(1.0, abs(whole))


def test_grid_integral_is_exact_sum_for_polynomials():
    rng = np.random.default_rng(8)
    for _ in range(100):
        coef = rng.uniform(-2, 2, size=int(rng.integers(1, 5)))
        a, b = (int(v) for v in np.sort(rng.integers(-20, 20, size=2)))
        want = sum(np.polyval(coef, k) for k in range(a, b))
        got = delta_integral(Z, lambda t: np.polyval(coef, t), a, b)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@pytest.mark.parametrize("f,F", [
    (lambda t: t ** 2, lambda t: t ** 3 / 3),
    (np.sin, lambda t: -np.cos(t)),
    (np.exp, np.exp),
    (lambda t: 1 / (1 + t ** 2), np.arctan),
])
def test_continuum_integral_closed_forms(f, F):
    rng = np.random.default_rng(9)
    for _ in range(10):
        a, b = np.round(np.sort(rng.uniform(-3, 3, size=2)), 3)
        want = F(b) - F(a)
        assert delta_integral(R, f, a, b) == pytest.approx(want, rel=1e-6, abs=1e-9)
