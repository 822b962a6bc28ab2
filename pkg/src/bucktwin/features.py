"""Feature/target construction for degradation regression.

A regression model consumes six measured or estimated quantities per record
and predicts the five true component values:

    features X = [L*, C*, r_L*, r_C*, V_o*, I_L*]
    targets  Y = [L, C, r_L, r_C, r_ds_on]   (true, pre-noise)

The starred component values L*, C*, r_L*, r_C* are the record's measured
(noisy) outputs — the role an identification step plays on hardware. The
starred waveform summaries V_o*, I_L* come from simulating the converter
with the record's *true* degraded component values at the nominal operating
point and averaging the steady-state output voltage and inductor current;
Gaussian measurement noise (sigma_voltage / sigma_current) is then applied
to them, drawn from ``default_rng((noise.seed, record_id, 1))`` — a stream
disjoint from the record-noise stream ``(seed, record_id)``.

Targets require ground truth, so design matrices can only be built from
records produced by a generator in-process; a CSV round trip drops truth.
"""

from __future__ import annotations

import numpy as np

from .converter import ConverterParams, SimConfig, measure_ripple, simulate, table_defaults
from .degradation import (
    TARGET_FIELDS,
    DegradationOutput,
    DegradationRecord,
    NoiseSpec,
)
from .errors import ValidationError

FEATURE_FIELDS = ("L_star", "C_star", "r_L_star", "r_C_star", "V_o_star", "I_L_star")


def waveform_summary(
    output: DegradationOutput,
    operating: ConverterParams | None = None,
    sim: SimConfig | None = None,
) -> tuple[float, float]:
    """Steady-state (v_o_avg, i_L_avg) of the converter built from these
    component values, simulated at the nominal operating point."""
    operating = operating if operating is not None else table_defaults()
    sim = sim if sim is not None else SimConfig()
    params = operating.replace(
        L=output.L,
        C=output.C,
        r_L=output.r_L,
        r_C=output.r_C,
        r_ds_on=output.r_ds_on,
    )
    metrics = measure_ripple(simulate(params, sim), sim)
    return metrics.v_o_avg, metrics.i_L_avg


def build_design_matrices(
    records: list[DegradationRecord] | tuple[DegradationRecord, ...],
    operating: ConverterParams | None = None,
    sim: SimConfig | None = None,
    noise: NoiseSpec | None = NoiseSpec(),
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix X (n, 6) and target matrix Y (n, 5) for the records.

    ``noise=None`` leaves the waveform summaries exactly as simulated
    (useful in tests); otherwise sigma_voltage / sigma_current measurement
    noise is added per record, deterministically under ``noise.seed``.
    Raises if any record lacks ground truth.
    """
    if len(records) == 0:
        raise ValidationError("need at least one record")
    missing = [r.record_id for r in records if r.truth is None]
    if missing:
        raise ValidationError(
            f"{len(missing)} record(s) lack ground truth (e.g. id {missing[0]}); "
            "design matrices need records fresh from a generator, not a CSV round trip"
        )
    if noise is not None:
        noise.validate()

    x = np.empty((len(records), 6))
    y = np.empty((len(records), 5))
    for row, record in enumerate(records):
        v_o_star, i_l_star = waveform_summary(record.truth, operating, sim)
        if noise is not None:
            rng = np.random.default_rng((noise.seed, record.record_id, 1))
            v_o_star += rng.normal(0.0, noise.sigma_voltage) if noise.sigma_voltage > 0 else 0.0
            i_l_star += rng.normal(0.0, noise.sigma_current) if noise.sigma_current > 0 else 0.0
        x[row] = (
            record.output.L,
            record.output.C,
            record.output.r_L,
            record.output.r_C,
            v_o_star,
            i_l_star,
        )
        y[row] = [getattr(record.truth, f) for f in TARGET_FIELDS]
    return x, y
