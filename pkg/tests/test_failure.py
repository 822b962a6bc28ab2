"""Tests for failure forecasting (time-to-failure and first failing part)."""

import math

import numpy as np
import pytest

from bucktwin.degradation import (
    DegradationOutput,
    DegradationRecord,
    StressInput,
    default_constants,
    degrade,
)
from bucktwin.errors import ValidationError
from bucktwin.failure import (
    COMPONENT_ORDER,
    FailureReport,
    FailureThresholds,
    RateEstimate,
    rate_from_history,
    rates_from_stress,
    synthetic_ttf_consistency,
    threshold_value,
    time_to_failure,
)


def nominal_output(**overrides) -> DegradationOutput:
    c = default_constants()
    values = {
        "L": c.L0,
        "C": c.C0,
        "r_L": c.r_L0,
        "r_C": c.r_C0,
        "r_ds_on": c.r_ds0,
        "t_failure": c.t0,
    }
    values.update(overrides)
    return DegradationOutput(**values)


def unit_rates(value=1e-6) -> dict:
    return {name: value for name in COMPONENT_ORDER}


def stress_with(**overrides) -> StressInput:
    values = {name: 0.0 for name in StressInput.__dataclass_fields__}
    values.update(overrides)
    return StressInput(**values)


class TestThresholds:
    def test_defaults_and_threshold_values(self):
        t = FailureThresholds()
        c = default_constants()
        assert threshold_value("C", c, t) == pytest.approx(176e-6)
        assert threshold_value("L", c, t) == pytest.approx(90e-6)
        assert threshold_value("r_L", c, t) == pytest.approx(0.30)
        assert threshold_value("r_C", c, t) == pytest.approx(0.30)
        assert threshold_value("r_ds_on", c, t) == pytest.approx(0.15)

    @pytest.mark.parametrize(
        "bad",
        [
            {"c_drop_fraction": 0.0},
            {"c_drop_fraction": 1.5},
            {"l_drop_fraction": -0.1},
            {"r_l_growth_fraction": 0.0},
            {"r_ds_growth_fraction": -1.0},
        ],
    )
    def test_rejects_bad_fractions(self, bad):
        with pytest.raises(ValidationError):
            FailureThresholds(**bad).validate()


class TestTimeToFailure:
    def test_capacitor_at_threshold_has_zero_ttf_and_unit_margin(self):
        report = time_to_failure(nominal_output(C=176e-6), unit_rates())
        assert report.per_component_ttf["C"] == 0.0
        assert report.margin["C"] == pytest.approx(1.0)
        assert report.first_failing == "C"
        assert report.t_failure_hours == 0.0

    def test_linear_extrapolation_case(self):
        report = time_to_failure(
            nominal_output(C=198e-6), {**unit_rates(0.0), "C": 2.2e-6}
        )
        assert report.per_component_ttf["C"] == pytest.approx(10.0)
        assert report.first_failing == "C"
        assert report.t_failure_hours == pytest.approx(10.0)

    def test_all_nominal_zero_rates_never_fails(self):
        report = time_to_failure(nominal_output(), unit_rates(0.0))
        assert math.isinf(report.t_failure_hours)
        assert report.first_failing is None
        assert all(math.isinf(v) for v in report.per_component_ttf.values())
        assert all(m == pytest.approx(0.0) for m in report.margin.values())

    def test_past_threshold_clamps_to_zero(self):
        report = time_to_failure(nominal_output(C=150e-6), unit_rates(0.0))
        assert report.per_component_ttf["C"] == 0.0
        assert report.margin["C"] > 1.0

    def test_tie_break_follows_fixed_component_order(self):
        c = default_constants()
        current = nominal_output(
            C=threshold_value("C", c, FailureThresholds()),
            r_L=threshold_value("r_L", c, FailureThresholds()),
        )
        report = time_to_failure(current, unit_rates())
        assert report.per_component_ttf["C"] == report.per_component_ttf["r_L"] == 0.0
        assert report.first_failing == "C"
        assert COMPONENT_ORDER.index("C") < COMPONENT_ORDER.index("r_L")

    def test_faster_rate_never_increases_ttf(self):
        current = nominal_output(C=200e-6, r_L=0.25)
        slow = time_to_failure(current, unit_rates(1e-6))
        fast = time_to_failure(current, unit_rates(2e-6))
        for name in COMPONENT_ORDER:
            assert fast.per_component_ttf[name] <= slow.per_component_ttf[name]

    def test_rejects_missing_or_negative_rates(self):
        with pytest.raises(ValidationError, match="missing"):
            time_to_failure(nominal_output(), {"C": 1.0})
        with pytest.raises(ValidationError, match="finite"):
            time_to_failure(nominal_output(), {**unit_rates(), "L": -1.0})
        with pytest.raises(ValidationError, match="finite"):
            time_to_failure(nominal_output(), {**unit_rates(), "L": math.nan})

    def test_json_report_uses_inf_markers_and_null_component(self):
        report = time_to_failure(nominal_output(), unit_rates(0.0))
        payload = report.to_dict()
        assert payload["t_failure_hours"] == "inf"
        assert payload["first_failing"] is None
        assert all(v == "inf" for v in payload["per_component"].values())
        finite = time_to_failure(nominal_output(C=198e-6), unit_rates(1e-6))
        payload = finite.to_dict()
        assert isinstance(payload["t_failure_hours"], float)
        assert payload["first_failing"] in COMPONENT_ORDER


class TestReportInvariantProperty:
    def test_thousand_randomized_inputs_keep_min_invariant(self):
        rng = np.random.default_rng(0)
        c = default_constants()
        for _ in range(1000):
            current = nominal_output(
                L=c.L0 * rng.uniform(0.5, 1.1),
                C=c.C0 * rng.uniform(0.5, 1.1),
                r_L=c.r_L0 * rng.uniform(0.8, 2.2),
                r_C=c.r_C0 * rng.uniform(0.8, 2.2),
                r_ds_on=c.r_ds0 * rng.uniform(0.8, 2.2),
            )
            rates = {
                name: float(rng.choice([0.0, rng.uniform(1e-9, 1e-3)]))
                for name in COMPONENT_ORDER
            }
            report = time_to_failure(current, rates)
            assert report.t_failure_hours == min(
                report.per_component_ttf.values()
            )
            if math.isinf(report.t_failure_hours):
                assert report.first_failing is None
            else:
                expected = next(
                    name
                    for name in COMPONENT_ORDER
                    if report.per_component_ttf[name] == report.t_failure_hours
                )
                assert report.first_failing == expected


class TestRatesFromStress:
    def test_rates_match_linear_wear_maps(self):
        c = default_constants()
        stress = stress_with(V_in=10.0, I_in=2.0, V_C=5.0, I_C=1.0,
                             V_L=4.0, I_L=2.0, V_D=6.0, I_D=1.5)
        record = DegradationRecord(0, stress, degrade(stress, c))
        rates = rates_from_stress(record, c)
        assert rates["L"] == pytest.approx(c.k_L * 12.0)
        assert rates["C"] == pytest.approx(c.k_C * 6.0)
        assert rates["r_L"] == pytest.approx(c.k_rL * 6.0)
        assert rates["r_C"] == pytest.approx(c.k_rC * 6.0)
        assert rates["r_ds_on"] == pytest.approx(c.k_rds * 7.5)


class TestRateFromHistory:
    def test_two_point_capacitance_decay(self):
        history = [
            (0.0, nominal_output()),
            (1.0, nominal_output(C=218e-6)),
        ]
        estimate = rate_from_history(history)
        assert estimate.rates["C"] == pytest.approx(2e-6)
        assert estimate.warnings == ()

    def test_constant_history_gives_zero_rates(self):
        history = [(float(t), nominal_output()) for t in range(5)]
        estimate = rate_from_history(history)
        assert all(rate == pytest.approx(0.0) for rate in estimate.rates.values())
        assert estimate.warnings == ()

    def test_noisy_linear_decay_recovers_slope_within_10_percent(self):
        rng = np.random.default_rng(4)
        slope = 2e-6  # F per hour, decaying
        c0 = 220e-6
        history = []
        for t in np.linspace(0.0, 9.0, 10):
            value = c0 - slope * t + rng.normal(0.0, 0.01 * c0 * 0.01)
            history.append((float(t), nominal_output(C=value)))
        estimate = rate_from_history(history)
        assert estimate.rates["C"] == pytest.approx(slope, rel=0.10)

    def test_improving_component_clamps_to_zero_with_warning(self):
        history = [
            (0.0, nominal_output(r_L=0.25)),
            (2.0, nominal_output(r_L=0.20)),
        ]
        estimate = rate_from_history(history)
        assert estimate.rates["r_L"] == 0.0
        assert any("r_L" in w for w in estimate.warnings)

    def test_rejects_short_or_unordered_history(self):
        with pytest.raises(ValidationError, match=">= 2"):
            rate_from_history([(0.0, nominal_output())])
        with pytest.raises(ValidationError, match="increasing"):
            rate_from_history(
                [(1.0, nominal_output()), (1.0, nominal_output())]
            )


class TestSyntheticConsistency:
    def test_zero_stress_reports_flagged_infinite_gap(self):
        stress = stress_with()
        record = DegradationRecord(0, stress, degrade(stress, default_constants()))
        assert math.isinf(synthetic_ttf_consistency(record))

    def test_max_stress_both_models_report_failure_now(self):
        stress = stress_with(V_in=20.0, I_in=5.0, V_D=15.0, I_D=5.0,
                             V_L=12.0, I_L=5.0, V_C=15.0, I_C=2.0, V_o=12.0)
        record = DegradationRecord(0, stress, degrade(stress, default_constants()))
        assert record.output.t_failure == 0.0
        assert synthetic_ttf_consistency(record) == pytest.approx(0.0)

    def test_mid_range_stress_gap_is_finite_and_reported(self):
        stress = stress_with(V_in=12.0, I_in=2.5, V_D=7.0, I_D=2.5,
                             V_L=6.0, I_L=2.5, V_C=8.0, I_C=1.0, V_o=6.0)
        record = DegradationRecord(0, stress, degrade(stress, default_constants()))
        gap = synthetic_ttf_consistency(record)
        assert math.isfinite(gap) and gap >= 0.0
