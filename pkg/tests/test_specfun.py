"""Special-function layer: series, inversions, and the f'' f = k family."""

import math

import pytest
from hypothesis import given, strategies as st

from linestab.specfun import (
    ERFI_ARG_MAX,
    erfi,
    f0,
    f0_inverse,
    solve_ode,
    u_inverse,
)
from oracles import erfi_quadrature

SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


class TestErfi:
    def test_matches_quadrature(self):
        for i in range(61):
            x = 0.05 * i  # [0, 3]
            want = erfi_quadrature(x)
            got = erfi(x)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-14), f"x={x}"

    def test_matches_quadrature_moderately_large(self):
        for x in (4.0, 5.5, 7.0):
            assert erfi(x) == pytest.approx(erfi_quadrature(x), rel=1e-10)

    def test_odd_function(self):
        for x in (0.3, 1.7, 9.0):
            assert erfi(-x) == -erfi(x)

    def test_zero(self):
        assert erfi(0.0) == 0.0

    def test_largest_argument_is_finite(self):
        assert math.isfinite(erfi(ERFI_ARG_MAX))

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            erfi(ERFI_ARG_MAX * 1.0000001)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            erfi(math.nan)
        with pytest.raises(ValueError):
            erfi(math.inf)

    @given(st.floats(min_value=0.0, max_value=10.0), st.floats(min_value=0.0, max_value=10.0))
    def test_monotone(self, x, y):
        lo, hi = sorted((x, y))
        assert erfi(lo) <= erfi(hi)

    @given(st.floats(min_value=0.0, max_value=20.0))
    def test_dominates_linear_part(self, x):
        # exp(u^2) >= 1 on the integration range
        assert erfi(x) >= 2.0 / math.sqrt(math.pi) * x - 1e-15


class TestUInverse:
    def test_round_trip(self):
        for i in range(1, 101):
            u = 0.05 * i  # (0, 5]
            x = SQRT_HALF_PI * erfi(u)
            assert u_inverse(x) == pytest.approx(u, rel=1e-12), f"u={u}"

    def test_zero(self):
        assert u_inverse(0.0) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            u_inverse(-0.5)

    def test_overflow_guard(self):
        # the representable ceiling is sqrt(pi/2)*erfi(ERFI_ARG_MAX) ~ 4.8e306
        with pytest.raises(OverflowError):
            u_inverse(5e306)

    @given(st.floats(min_value=1e-3, max_value=100.0))
    def test_residual_definition(self, x):
        u = u_inverse(x)
        assert SQRT_HALF_PI * erfi(u) == pytest.approx(x, rel=1e-12)

    @given(st.floats(min_value=0.0, max_value=50.0))
    def test_below_linear_bound(self, x):
        # integrand >= 1 forces U <= x / sqrt(2)
        assert u_inverse(x) <= x / math.sqrt(2.0) + 1e-15


class TestF0:
    def test_anchor(self):
        assert f0(0.0) == 1.0

    def test_inverse_round_trip_forward(self):
        for i in range(81):
            x = 0.05 * i  # [0, 4]
            assert f0_inverse(f0(x)) == pytest.approx(x, rel=1e-11, abs=1e-12)

    def test_inverse_round_trip_backward(self):
        y = 1.0
        while y <= 50.0:
            assert f0(f0_inverse(y)) == pytest.approx(y, rel=1e-11)
            y *= 1.37

    def test_monotone_increasing(self):
        prev = f0(0.0)
        for i in range(1, 60):
            cur = f0(0.1 * i)
            assert cur > prev
            prev = cur

    def test_f0_satisfies_ode(self):
        # rounding in the second difference scales like eps * f^2 / h^2,
        # and f reaches ~7 at x = 2.9, so h must not be too small
        h = 5e-4
        for i in range(1, 30):
            x = 0.1 * i
            f2 = (f0(x + h) - 2.0 * f0(x) + f0(x - h)) / (h * h)
            assert f2 * f0(x) == pytest.approx(1.0, abs=1e-6)

    def test_f0_inverse_rejects_below_one(self):
        with pytest.raises(ValueError):
            f0_inverse(0.999)


class TestSolveOde:
    def test_scaling_identities(self):
        sol = solve_ode(k=2.3, y0=1.2, w0=0.4)
        assert sol.gamma * sol.beta == pytest.approx(math.sqrt(2.3), rel=1e-14)
        assert sol.gamma * f0(sol.alpha) == pytest.approx(1.2, rel=1e-13)

    def test_initial_value(self):
        for k, y0, w0 in [(1.0, 1.0, 0.0), (2.0, 0.8, 0.5), (0.9, 1.3, 0.7)]:
            sol = solve_ode(k, y0, w0)
            assert sol(0.0) == pytest.approx(y0, rel=1e-12)

    def test_initial_slope(self):
        # the solution only exists for t >= 0 when w0 = 0, so the stencil
        # must be one-sided; this one is second order
        h = 1e-5
        for k, y0, w0 in [(1.0, 1.0, 0.0), (2.5, 1.1, 0.6), (0.8, 0.7, 0.3)]:
            sol = solve_ode(k, y0, w0)
            slope = (-3.0 * sol(0.0) + 4.0 * sol(h) - sol(2.0 * h)) / (2.0 * h)
            assert slope == pytest.approx(w0, abs=5e-6)

    # windows chosen so finite differences stay accurate: for large k or
    # tiny y0 the solution is steep and h^2-truncation dominates the check
    @given(
        st.floats(min_value=0.8, max_value=3.0),
        st.floats(min_value=0.7, max_value=1.4),
        st.floats(min_value=0.0, max_value=0.7),
    )
    def test_ode_residual(self, k, y0, w0):
        sol = solve_ode(k, y0, w0)
        h = 5e-4  # balances h^2 truncation against eps * f^2 / h^2 rounding
        for i in range(1, 51):
            t = 0.02 * i  # (0, 1]
            f2 = (sol(t + h) - 2.0 * sol(t) + sol(t - h)) / (h * h)
            assert abs(f2 * sol(t) - k) < 2e-6 * k

    @given(
        st.floats(min_value=0.8, max_value=3.0),
        st.floats(min_value=0.7, max_value=1.4),
        st.floats(min_value=0.0, max_value=0.7),
    )
    def test_energy_integral(self, k, y0, w0):
        # f'^2 - 2 k log(f / y0) is conserved and equals w0^2
        sol = solve_ode(k, y0, w0)
        h = 1e-5
        for t in (0.25, 0.5, 1.0):
            fp = (sol(t + h) - sol(t - h)) / (2.0 * h)
            energy = fp * fp - 2.0 * k * math.log(sol(t) / y0)
            assert energy == pytest.approx(w0 * w0, abs=5e-5)

    def test_validation(self):
        with pytest.raises(ValueError):
            solve_ode(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            solve_ode(1.0, -1.0, 0.0)
        with pytest.raises(ValueError):
            solve_ode(1.0, 1.0, -0.1)
