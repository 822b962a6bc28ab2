"""Failure forecasting from degradation parameters.

Maps a set of component values (ground truth or regression predictions) to
per-component time-to-failure, the first failing component, and threshold
margins. A component fails when its value crosses a fractional threshold
relative to nominal: L and C fail by dropping, the resistances by growing.
Remaining headroom divided by a degradation rate (units per hour) gives the
time to failure; the report's headline t_failure is the minimum over
components and first_failing the component achieving it (ties broken in the
fixed order L, C, r_L, r_C, r_ds_on).

A component with zero rate and headroom left never fails (ttf = infinity —
reported, not an error). The JSON form writes infinities as the string
"inf" and first_failing as null when no component is projected to fail.

Two time-to-failure notions coexist by design: the dataset's linear-map
label (t0 - k_t * (V_in + I_in)) and the threshold projection computed
here. They answer different questions (calendar label vs. headroom
forecast); ``synthetic_ttf_consistency`` measures their gap on noiseless
records instead of pretending they coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degradation import (
    TARGET_FIELDS,
    DegradationConstants,
    DegradationOutput,
    DegradationRecord,
    default_constants,
)
from .errors import ValidationError

#: Fixed tie-break and reporting order for components.
COMPONENT_ORDER = TARGET_FIELDS  # ("L", "C", "r_L", "r_C", "r_ds_on")

#: +1 for parameters that degrade by growing, -1 for those that drop.
_DIRECTION = {"L": -1.0, "C": -1.0, "r_L": +1.0, "r_C": +1.0, "r_ds_on": +1.0}


@dataclass(frozen=True)
class FailureThresholds:
    """Fractional failure thresholds relative to nominal values.

    Only the 20% capacitance drop is an industry-anchored figure
    (electrolytic end-of-life); the others are config-overridable,
    industry-typical defaults.
    """

    c_drop_fraction: float = 0.20
    l_drop_fraction: float = 0.10
    r_l_growth_fraction: float = 0.50
    r_c_growth_fraction: float = 1.00
    r_ds_growth_fraction: float = 0.50

    def validate(self):
        for name in ("c_drop_fraction", "l_drop_fraction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1], got {value}")
        for name in (
            "r_l_growth_fraction",
            "r_c_growth_fraction",
            "r_ds_growth_fraction",
        ):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValidationError(f"{name} must be > 0, got {value}")

    def fraction_for(self, component: str) -> float:
        return {
            "L": self.l_drop_fraction,
            "C": self.c_drop_fraction,
            "r_L": self.r_l_growth_fraction,
            "r_C": self.r_c_growth_fraction,
            "r_ds_on": self.r_ds_growth_fraction,
        }[component]


@dataclass(frozen=True)
class FailureReport:
    """Threshold-projection forecast for one parameter set.

    ``margin`` is the fraction of each component's threshold distance
    already consumed (0 = at nominal, 1 = exactly at threshold, > 1 =
    past it). ``t_failure_hours`` = min over ``per_component_ttf``;
    ``first_failing`` achieves it (None when nothing is projected to
    fail).
    """

    t_failure_hours: float
    first_failing: str | None
    per_component_ttf: dict[str, float]
    margin: dict[str, float]

    def to_dict(self) -> dict:
        def jsonify(value: float):
            return "inf" if math.isinf(value) else value

        return {
            "t_failure_hours": jsonify(self.t_failure_hours),
            "first_failing": self.first_failing,
            "per_component": {
                name: jsonify(ttf) for name, ttf in self.per_component_ttf.items()
            },
            "margins": dict(self.margin),
        }


def _nominal_for(component: str, constants: DegradationConstants) -> float:
    return {
        "L": constants.L0,
        "C": constants.C0,
        "r_L": constants.r_L0,
        "r_C": constants.r_C0,
        "r_ds_on": constants.r_ds0,
    }[component]


def threshold_value(
    component: str,
    constants: DegradationConstants,
    thresholds: FailureThresholds,
) -> float:
    """The component value at which failure is declared."""
    nominal = _nominal_for(component, constants)
    fraction = thresholds.fraction_for(component)
    return nominal * (1.0 + _DIRECTION[component] * fraction)


def time_to_failure(
    current: DegradationOutput,
    rates: dict[str, float],
    constants: DegradationConstants | None = None,
    thresholds: FailureThresholds | None = None,
) -> FailureReport:
    """Project each component's threshold crossing at the given rates.

    ``rates`` maps every component name to its degradation speed in units
    per hour, positive meaning movement toward failure (capacitance drop,
    resistance growth). Zero rate with headroom remaining yields an
    infinite ttf; a component at or past its threshold yields 0 regardless
    of rate.
    """
    constants = constants if constants is not None else default_constants()
    thresholds = thresholds if thresholds is not None else FailureThresholds()
    constants.validate()
    thresholds.validate()
    missing = [name for name in COMPONENT_ORDER if name not in rates]
    if missing:
        raise ValidationError(f"rates missing components: {missing}")
    for name in COMPONENT_ORDER:
        rate = rates[name]
        if not math.isfinite(rate) or rate < 0.0:
            raise ValidationError(
                f"rate for {name} must be finite and >= 0, got {rate}"
            )

    ttf: dict[str, float] = {}
    margin: dict[str, float] = {}
    for name in COMPONENT_ORDER:
        value = getattr(current, name)
        nominal = _nominal_for(name, constants)
        limit = threshold_value(name, constants, thresholds)
        distance = abs(limit - nominal)
        consumed = (value - nominal) * _DIRECTION[name]
        margin[name] = consumed / distance
        headroom = (limit - value) * _DIRECTION[name]
        if headroom <= 0.0:
            ttf[name] = 0.0
        elif rates[name] == 0.0:
            ttf[name] = math.inf
        else:
            ttf[name] = headroom / rates[name]

    t_failure = min(ttf[name] for name in COMPONENT_ORDER)
    first = None
    if not math.isinf(t_failure):
        for name in COMPONENT_ORDER:
            if ttf[name] == t_failure:
                first = name
                break
    return FailureReport(
        t_failure_hours=t_failure,
        first_failing=first,
        per_component_ttf=ttf,
        margin=margin,
    )


def rates_from_stress(
    record: DegradationRecord,
    constants: DegradationConstants | None = None,
) -> dict[str, float]:
    """Degradation rates implied by a record's stress level.

    Each component's linear wear map moves it k * (stress sum) from
    nominal; spreading that movement over one hour per stress unit gives
    units-per-hour rates consistent with the dataset's linear maps.
    """
    constants = constants if constants is not None else default_constants()
    stress = record.stress
    return {
        "L": constants.k_L * (stress.V_in + stress.I_in),
        "C": constants.k_C * (stress.V_C + stress.I_C),
        "r_L": constants.k_rL * (stress.V_L + stress.I_L),
        "r_C": constants.k_rC * (stress.V_C + stress.I_C),
        "r_ds_on": constants.k_rds * (stress.V_D + stress.I_D),
    }


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares degradation rates from a parameter history.

    Rates are signed toward failure (positive = degrading); a component
    whose fitted slope points away from failure is clamped to 0 and named
    in ``warnings``.
    """

    rates: dict[str, float]
    warnings: tuple[str, ...]


def rate_from_history(
    history: list[tuple[float, DegradationOutput]],
) -> RateEstimate:
    """Per-component least-squares slope (units per hour) from snapshots.

    ``history`` pairs timestamps in hours with parameter sets; timestamps
    must be strictly increasing and at least two snapshots are required.
    """
    if len(history) < 2:
        raise ValidationError(
            f"rate estimation needs >= 2 snapshots, got {len(history)}"
        )
    times = np.array([t for t, _ in history], dtype=float)
    if not np.all(np.isfinite(times)) or not np.all(np.diff(times) > 0.0):
        raise ValidationError("timestamps must be finite and strictly increasing")

    rates: dict[str, float] = {}
    warnings: list[str] = []
    design = np.column_stack([times, np.ones_like(times)])
    for name in COMPONENT_ORDER:
        values = np.array([getattr(out, name) for _, out in history], dtype=float)
        slope = np.linalg.lstsq(design, values, rcond=None)[0][0]
        scale = float(np.max(np.abs(values)))
        if abs(slope) <= 1e-9 * max(scale, 1e-300):
            # Dead band: constant histories fit to slopes at rounding noise.
            rates[name] = 0.0
            continue
        directed = slope * _DIRECTION[name]
        if directed < 0.0:
            warnings.append(
                f"{name}: fitted slope points away from failure "
                f"({slope:.3g} per hour)"
            )
            directed = 0.0
        rates[name] = directed
    return RateEstimate(rates=rates, warnings=tuple(warnings))


def synthetic_ttf_consistency(
    record: DegradationRecord,
    constants: DegradationConstants | None = None,
    thresholds: FailureThresholds | None = None,
) -> float:
    """Gap between the dataset's linear-map failure label and the
    threshold projection, both evaluated on a noiseless record.

    Returns |label - threshold t_failure|; infinity marks the flagged
    case where exactly one of the two is a no-failure projection (e.g.
    zero stress: the label says t0 hours, the projection says never).
    """
    constants = constants if constants is not None else default_constants()
    report = time_to_failure(
        record.output,
        rates_from_stress(record, constants),
        constants,
        thresholds,
    )
    label = record.output.t_failure
    if math.isinf(report.t_failure_hours):
        return math.inf
    return abs(label - report.t_failure_hours)
