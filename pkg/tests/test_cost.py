"""Waveform cost tests against analytic integrals."""

import numpy as np
import pytest

from bucktwin.converter import SimTrace
from bucktwin.cost import istse_arrays, istse_cost
from bucktwin.errors import ValidationError


def make_trace(t, v_o, i_L):
    n = len(t)
    return SimTrace(
        t=t,
        v_o=v_o,
        i_L=i_L,
        v_C=np.zeros(n),
        mode_flags=np.zeros(n, dtype=np.uint8),
    )


class TestAnalyticOracles:
    def test_identical_traces_cost_zero(self):
        t = np.arange(1000) * 1e-5
        a = make_trace(t, np.sin(t * 100), np.cos(t * 100))
        b = make_trace(t, a.v_o.copy(), a.i_L.copy())
        assert istse_cost(a, b) == 0.0

    def test_unit_error_both_channels_squared_time(self):
        # constant error of 1 on v_o and on i_L over [0, 1] s with weight t^2
        # integrates to 2 * (1/3) = 2/3
        t = np.arange(100001) * 1e-5
        cost = istse_arrays(t, np.ones_like(t), np.ones_like(t), time_exponent=2)
        exact = 2.0 / 3.0
        rel = abs(cost - exact) / exact
        print(f"cost={cost!r}, exact={exact!r}, rel err={rel:.2e}")
        assert rel < 1e-6, f"quadrature error {rel:.2e} exceeds 1e-6 relative"

    def test_unit_error_single_channel_linear_time(self):
        # weight t over [0, 2] s, one channel: integral of t dt = 2
        t = np.linspace(0.0, 2.0, 2001)
        cost = istse_arrays(t, np.ones_like(t), np.zeros_like(t), time_exponent=1)
        assert abs(cost - 2.0) < 1e-9

    def test_halving_dt_changes_smooth_cost_under_tenth_percent(self):
        def cost_at(n):
            t = np.linspace(0.0, 1.0, n)
            err = np.sin(2 * np.pi * t) + 0.5
            return istse_arrays(t, err, 0.3 * err, time_exponent=2)

        coarse = cost_at(2001)
        fine = cost_at(4001)
        rel = abs(coarse - fine) / fine
        assert rel < 1e-3, f"refinement moved cost by {rel:.2e}"


class TestTraceValidation:
    def test_rejects_length_mismatch(self):
        t1 = np.arange(100) * 1e-5
        t2 = np.arange(101) * 1e-5
        a = make_trace(t1, np.zeros(100), np.zeros(100))
        b = make_trace(t2, np.zeros(101), np.zeros(101))
        with pytest.raises(ValidationError):
            istse_cost(a, b)

    def test_rejects_dt_mismatch(self):
        a = make_trace(np.arange(100) * 1e-5, np.zeros(100), np.zeros(100))
        b = make_trace(np.arange(100) * 2e-5, np.zeros(100), np.zeros(100))
        with pytest.raises(ValidationError):
            istse_cost(a, b)

    def test_rejects_bad_exponent(self):
        t = np.arange(10) * 0.1
        with pytest.raises(ValidationError):
            istse_arrays(t, np.ones(10), np.ones(10), time_exponent=3)


class TestWeighting:
    def test_late_error_costs_more_than_early(self):
        t = np.linspace(0.0, 1.0, 1001)
        early = np.where(t < 0.2, 1.0, 0.0)
        late = np.where(t > 0.8, 1.0, 0.0)
        c_early = istse_arrays(t, early, np.zeros_like(t))
        c_late = istse_arrays(t, late, np.zeros_like(t))
        assert c_late > 10 * c_early

    def test_exponent_two_discounts_early_error_harder(self):
        t = np.linspace(0.0, 1.0, 1001)
        early = np.where(t < 0.2, 1.0, 0.0)
        assert istse_arrays(t, early, early, 2) < istse_arrays(t, early, early, 1)
