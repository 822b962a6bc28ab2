"""Synthetic component-degradation dataset for the buck converter.

Each record pairs a stress vector (terminal voltages and currents seen by
the converter and its parts) with the degraded component values that stress
level produces. Degradation follows linear stress-to-wear maps:

    L        = L0    - k_L   * (V_in + I_in)      (floored at 10% nominal)
    C        = C0    - k_C   * (V_C  + I_C)       (floored at 10% nominal)
    r_L      = r_L0  + k_rL  * (V_L  + I_L)
    r_C      = r_C0  + k_rC  * (V_C  + I_C)
    r_ds_on  = r_ds0 + k_rds * (V_D  + I_D)
    t_failure = max(0, t0 - k_t * (V_in + I_in))

Default constants are calibrated against the default sampling ranges so the
maximum stress drives each parameter 25% past nominal (except k_L, whose
default of 1.2 uH per volt-ampere unit gives a 30% drop at maximum stress)
and drives t_failure from t0 = 1000 h to exactly zero.

Stress sampling is uniform per field but, by default, coupled within wear
mechanisms (``STRESS_GROUPS``): input/switch electrical stress, inductor
stress, and output-side ripple stress each couple their fields through a
latent mechanism severity, while distinct mechanisms progress
independently. The coupling is a Gaussian copula — per record one latent
normal per group, every field's unit position the normal CDF of a
correlated normal — which keeps every marginal exactly U[0, 1] while
making fields of one mechanism strongly and smoothly correlated, so wear
on one component carries information about wear on related ones. A
non-positive ``coupling`` turns this off (independent uniform fields).

Gaussian measurement noise is applied after degradation to both the stress
fields and the degraded outputs; L, C and t_failure are re-clamped to their
physical floors afterwards (resistances are only floored at zero, which the
default sigmas never approach). Each record keeps the pre-noise component
values in its ``truth`` field: the noisy output columns play the role of
measured/estimated values, the truth values are the regression ground truth
(see the feature-construction module). Truth is generation-time metadata and
is not persisted to CSV.

Seed scheme (deterministic, partition-friendly): stress sampling uses
``default_rng(seed)``; the noise for record ``i`` uses
``default_rng((seed, i))``; the split shuffle uses ``default_rng((seed, 0, 1))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .errors import ValidationError

STRESS_FIELDS = ("V_in", "I_in", "V_D", "I_D", "V_L", "I_L", "V_C", "I_C", "V_o")
OUTPUT_FIELDS = ("L", "C", "r_L", "r_C", "r_ds_on", "t_failure")

#: Wear mechanisms: stress fields within a group share one latent severity
#: (input/switch electrical stress; inductor magnetic/thermal stress;
#: output-side ripple stress). Mechanisms progress independently.
STRESS_GROUPS = (
    ("V_in", "I_in", "V_D", "I_D"),
    ("V_L", "I_L"),
    ("V_C", "I_C", "V_o"),
)

#: Component-value columns a regression model predicts (true, pre-noise
#: values; t_failure is derived downstream from the predictions instead).
TARGET_FIELDS = ("L", "C", "r_L", "r_C", "r_ds_on")

DATASET_CSV_HEADER = (
    "id,V_in,I_in,V_D,I_D,V_L,I_L,V_C,I_C,V_o,L,C,r_L,r_C,r_ds_on,t_failure,stratum,split"
)

STRATUM_LABELS = ("early-life", "mid-life", "end-of-life")
SPLIT_NAMES = ("train", "val", "test")

_VOLTAGE_FIELDS = frozenset({"V_in", "V_D", "V_L", "V_C", "V_o"})


@dataclass(frozen=True)
class StressRanges:
    """Per-field uniform sampling intervals (lo, hi); lo == hi is allowed."""

    V_in: tuple[float, float] = (5.0, 20.0)
    I_in: tuple[float, float] = (0.1, 5.0)
    V_D: tuple[float, float] = (0.3, 15.0)
    I_D: tuple[float, float] = (0.1, 5.0)
    V_L: tuple[float, float] = (0.5, 12.0)
    I_L: tuple[float, float] = (0.1, 5.0)
    V_C: tuple[float, float] = (1.0, 15.0)
    I_C: tuple[float, float] = (0.05, 2.0)
    V_o: tuple[float, float] = (1.0, 12.0)

    def validate(self):
        for name in STRESS_FIELDS:
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValidationError(f"range for {name} must be finite, got ({lo}, {hi})")
            if lo > hi:
                raise ValidationError(f"range for {name} has lo > hi: ({lo}, {hi})")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lows = np.array([getattr(self, n)[0] for n in STRESS_FIELDS])
        highs = np.array([getattr(self, n)[1] for n in STRESS_FIELDS])
        return lows, highs


@dataclass(frozen=True)
class StressInput:
    """One stress vector. Fields are not range-checked here because noisy
    records may legitimately sit slightly outside the sampling ranges."""

    V_in: float
    I_in: float
    V_D: float
    I_D: float
    V_L: float
    I_L: float
    V_C: float
    I_C: float
    V_o: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in STRESS_FIELDS])


@dataclass(frozen=True)
class DegradationConstants:
    """Nominal component values and linear wear rates (per volt+ampere)."""

    L0: float
    C0: float
    r_L0: float
    r_C0: float
    r_ds0: float
    t0: float
    k_L: float
    k_C: float
    k_rL: float
    k_rC: float
    k_rds: float
    k_t: float

    def validate(self):
        for name in ("L0", "C0", "r_L0", "r_C0", "r_ds0", "t0"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("k_L", "k_C", "k_rL", "k_rC", "k_rds", "k_t"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")


def default_constants() -> DegradationConstants:
    """Wear rates calibrated against the default stress ranges.

    Nominals match the converter's nominal operating point. Each rate is
    set so the maximum in-range stress sum moves its parameter 25% from
    nominal, except k_L = 1.2 uH/unit (a 30% drop at V_in + I_in = 25) and
    k_t = 40 h/unit, which takes t_failure from 1000 h to exactly 0 at
    maximum stress.
    """
    return DegradationConstants(
        L0=100e-6,
        C0=220e-6,
        r_L0=0.2,
        r_C0=0.15,
        r_ds0=0.1,
        t0=1000.0,
        k_L=1.2e-6,             # example-pinned; 30% drop at max stress 25
        k_C=0.25 * 220e-6 / 17.0,   # V_C + I_C spans up to 17
        k_rL=0.25 * 0.2 / 17.0,     # V_L + I_L spans up to 17
        k_rC=0.25 * 0.15 / 17.0,    # V_C + I_C spans up to 17
        k_rds=0.25 * 0.1 / 20.0,    # V_D + I_D spans up to 20
        k_t=1000.0 / 25.0,          # V_in + I_in spans up to 25
    )


@dataclass(frozen=True)
class DegradationOutput:
    """Degraded component values and the linear-map failure-time label."""

    L: float
    C: float
    r_L: float
    r_C: float
    r_ds_on: float
    t_failure: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in OUTPUT_FIELDS])


@dataclass(frozen=True)
class NoiseSpec:
    """Per-field-class Gaussian sigmas plus the dataset seed.

    sigma_r applies to all three resistances; its default is 0.5% of the
    largest resistance nominal (r_L0 = 0.2 ohm).
    """

    sigma_voltage: float = 0.035  # V
    sigma_current: float = 0.035  # A
    sigma_L: float = 0.35e-6      # H
    sigma_C: float = 0.5e-6       # F
    sigma_r: float = 1e-3         # ohm
    sigma_t: float = 1.0          # h
    seed: int = 0

    def validate(self):
        for name in ("sigma_voltage", "sigma_current", "sigma_L", "sigma_C", "sigma_r", "sigma_t"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")


def zero_noise(seed: int = 0) -> NoiseSpec:
    return NoiseSpec(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, seed=seed)


@dataclass(frozen=True)
class DegradationRecord:
    """One dataset row: id, stress vector, degraded outputs, and (once the
    dataset is assembled) the severity stratum and split membership.

    ``output`` holds the measured (noisy) values; ``truth`` the pre-noise
    component values when the record came from a generator (None after a
    CSV round trip — truth is not a persisted column).
    """

    record_id: int
    stress: StressInput
    output: DegradationOutput
    truth: DegradationOutput | None = None
    stratum: str | None = None
    split: str | None = None


@dataclass(frozen=True)
class ThermalRamp:
    """Accelerated thermal ageing scenario: a linear temperature ramp whose
    wall-clock minutes count ``acceleration_factor`` times toward age."""

    T_start: float = 24.21          # degC
    T_end: float = 82.95            # degC
    duration_minutes: float = 50.0
    acceleration_factor: float = 23.0

    def validate(self):
        if not self.T_end > self.T_start:
            raise ValidationError(
                f"T_end must exceed T_start, got {self.T_end} <= {self.T_start}"
            )
        if not self.duration_minutes > 0:
            raise ValidationError(f"duration must be positive, got {self.duration_minutes}")
        if self.acceleration_factor < 1:
            raise ValidationError(
                f"acceleration_factor must be >= 1, got {self.acceleration_factor}"
            )

    def aged_minutes(self, t_minutes: float) -> float:
        """Equivalent aged time after t wall-clock minutes on the ramp."""
        _check_ramp_time(self, t_minutes)
        return t_minutes * self.acceleration_factor


def _check_ramp_time(ramp: ThermalRamp, t_minutes: float):
    if not 0.0 <= t_minutes <= ramp.duration_minutes:
        raise ValidationError(
            f"t={t_minutes} min outside ramp duration [0, {ramp.duration_minutes}]"
        )


def thermal_ramp_temperature(ramp: ThermalRamp, t_minutes: float) -> float:
    """Ramp temperature at t minutes (linear interpolation)."""
    ramp.validate()
    _check_ramp_time(ramp, t_minutes)
    frac = t_minutes / ramp.duration_minutes
    return ramp.T_start + (ramp.T_end - ramp.T_start) * frac


def degrade(
    stress: StressInput,
    constants: DegradationConstants,
    min_fraction: float = 0.1,
) -> DegradationOutput:
    """Apply the linear stress-to-wear maps to one stress vector.

    L and C are floored at ``min_fraction`` of nominal; t_failure at zero.
    """
    constants.validate()
    if not 0.0 <= min_fraction < 1.0:
        raise ValidationError(f"min_fraction must lie in [0, 1), got {min_fraction}")
    k = constants
    return DegradationOutput(
        L=max(k.L0 * min_fraction, k.L0 - k.k_L * (stress.V_in + stress.I_in)),
        C=max(k.C0 * min_fraction, k.C0 - k.k_C * (stress.V_C + stress.I_C)),
        r_L=k.r_L0 + k.k_rL * (stress.V_L + stress.I_L),
        r_C=k.r_C0 + k.k_rC * (stress.V_C + stress.I_C),
        r_ds_on=k.r_ds0 + k.k_rds * (stress.V_D + stress.I_D),
        t_failure=max(0.0, k.t0 - k.k_t * (stress.V_in + stress.I_in)),
    )


def sample_stress(
    ranges: StressRanges,
    rng_seed: int,
    n: int,
    coupling: float = 0.999,
) -> list[StressInput]:
    """Draw n stress vectors, uniform per field, deterministic under seed.

    With 0 < ``coupling`` < 1 the fields of each wear mechanism
    (``STRESS_GROUPS``) share a latent severity through a Gaussian copula:
    per record one latent z_g ~ N(0, 1) is drawn per group, each field in
    the group gets z_i = coupling * z_g + sqrt(1 - coupling^2) * eps_i
    with independent eps_i ~ N(0, 1), and the field's unit position is the
    standard normal CDF of z_i. Each z_i is standard normal, so every
    marginal is exactly U[0, 1] while fields of one mechanism remain
    smoothly coupled (a unit whose switch has seen heavy stress has almost
    surely seen heavy input stress too); distinct mechanisms wear
    independently. ``coupling`` <= 0 samples every field independently;
    ``coupling`` = 1 makes the fields of a group identical copies.
    """
    ranges.validate()
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if coupling > 1.0:
        raise ValidationError(f"coupling must be <= 1, got {coupling}")
    rng = np.random.default_rng(rng_seed)
    n_fields = len(STRESS_FIELDS)
    if coupling > 0.0:
        group_of = {
            name: g for g, fields in enumerate(STRESS_GROUPS) for name in fields
        }
        group_idx = np.array([group_of[name] for name in STRESS_FIELDS])
        z_group = rng.standard_normal(size=(n, len(STRESS_GROUPS)))
        eps = rng.standard_normal(size=(n, n_fields))
        z = coupling * z_group[:, group_idx] + math.sqrt(1.0 - coupling**2) * eps
        unit = ndtr(z)
    else:
        unit = rng.uniform(0.0, 1.0, size=(n, n_fields))
    lows, highs = ranges.as_arrays()
    values = lows + unit * (highs - lows)
    return [StressInput(*row) for row in values]


def add_noise(
    record: DegradationRecord,
    spec: NoiseSpec,
    constants: DegradationConstants | None = None,
    min_fraction: float = 0.1,
    rng: np.random.Generator | None = None,
) -> DegradationRecord:
    """Perturb every stress and output field with zero-mean Gaussian noise.

    Outputs are re-clamped afterwards: L and C to ``min_fraction`` of
    nominal, t_failure to zero, resistances to zero. When ``rng`` is not
    supplied, a per-record generator seeded by (spec.seed, record_id) is
    used, so noising is order-independent and partitionable. The record's
    ``truth`` field passes through untouched.
    """
    spec.validate()
    if constants is None:
        constants = default_constants()
    if rng is None:
        rng = np.random.default_rng((spec.seed, record.record_id))

    def sigma_for(field: str) -> float:
        return spec.sigma_voltage if field in _VOLTAGE_FIELDS else spec.sigma_current

    stress_noisy = StressInput(*(
        getattr(record.stress, f) + rng.normal(0.0, sigma_for(f)) if sigma_for(f) > 0
        else getattr(record.stress, f)
        for f in STRESS_FIELDS
    ))
    out = record.output
    out_sigmas = (spec.sigma_L, spec.sigma_C, spec.sigma_r, spec.sigma_r,
                  spec.sigma_r, spec.sigma_t)
    noisy_vals = [
        getattr(out, f) + (rng.normal(0.0, s) if s > 0 else 0.0)
        for f, s in zip(OUTPUT_FIELDS, out_sigmas)
    ]
    output_noisy = DegradationOutput(
        L=max(constants.L0 * min_fraction, noisy_vals[0]),
        C=max(constants.C0 * min_fraction, noisy_vals[1]),
        r_L=max(0.0, noisy_vals[2]),
        r_C=max(0.0, noisy_vals[3]),
        r_ds_on=max(0.0, noisy_vals[4]),
        t_failure=max(0.0, noisy_vals[5]),
    )
    return replace(record, stress=stress_noisy, output=output_noisy)


@dataclass(frozen=True)
class DatasetSplit:
    """Stratified train/validation/test partition of the generated records.

    ``strata_labels`` holds each record's severity stratum in record-id
    order (ids are sequential from zero across the whole dataset).
    """

    train: tuple[DegradationRecord, ...]
    validation: tuple[DegradationRecord, ...]
    test: tuple[DegradationRecord, ...]
    strata_labels: tuple[str, ...]

    def all_records(self) -> list[DegradationRecord]:
        return sorted(
            (*self.train, *self.validation, *self.test),
            key=lambda r: r.record_id,
        )

    def validate(self):
        ids = [r.record_id for r in (*self.train, *self.validation, *self.test)]
        n = len(ids)
        if sorted(ids) != list(range(n)):
            raise ValidationError("split record ids must be disjoint and exhaustive")
        if len(self.strata_labels) != n:
            raise ValidationError(
                f"{len(self.strata_labels)} strata labels for {n} records"
            )
        for label in self.strata_labels:
            if label not in STRATUM_LABELS:
                raise ValidationError(f"unknown stratum label {label!r}")


def _split_counts(n: int) -> tuple[int, int, int]:
    n_train = round(0.70 * n)
    n_val = round(0.15 * n)
    return n_train, n_val, n - n_train - n_val


def _assign_severity_strata(stress_sums: np.ndarray) -> np.ndarray:
    """Tertile labels (indices into STRATUM_LABELS) of V_in + I_in."""
    q1, q2 = np.quantile(stress_sums, [1.0 / 3.0, 2.0 / 3.0])
    labels = np.zeros(len(stress_sums), dtype=np.int64)
    labels[stress_sums > q1] = 1
    labels[stress_sums > q2] = 2
    return labels


def _stratified_split_indices(
    strata: np.ndarray, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Partition record indices 0..n-1 into train/val/test.

    Global sizes are exact (largest-remainder on 70/15/15); each stratum is
    allocated proportionally by largest remainder, then at most a couple of
    single-record moves reconcile stratum totals with the global targets.
    """
    n = len(strata)
    targets = dict(zip(SPLIT_NAMES, _split_counts(n)))
    fractions = {name: targets[name] / n for name in SPLIT_NAMES}

    # Per-stratum largest-remainder allocation.
    alloc: dict[int, dict[str, int]] = {}
    for stratum in sorted(set(strata.tolist())):
        n_h = int(np.sum(strata == stratum))
        quotas = {name: fractions[name] * n_h for name in SPLIT_NAMES}
        counts = {name: int(np.floor(quotas[name])) for name in SPLIT_NAMES}
        short = n_h - sum(counts.values())
        by_remainder = sorted(
            SPLIT_NAMES, key=lambda s: quotas[s] - counts[s], reverse=True
        )
        for name in by_remainder[:short]:
            counts[name] += 1
        alloc[stratum] = counts

    # Reconcile with the exact global targets (moves one record at a time
    # from an over-target split to an under-target one, choosing the
    # stratum whose allocation is most above its proportional quota).
    def totals():
        return {name: sum(alloc[h][name] for h in alloc) for name in SPLIT_NAMES}

    current = totals()
    while current != targets:
        over = next(s for s in SPLIT_NAMES if current[s] > targets[s])
        under = next(s for s in SPLIT_NAMES if current[s] < targets[s])
        donor = max(
            (h for h in alloc if alloc[h][over] > 0),
            key=lambda h: alloc[h][over] - fractions[over] * sum(alloc[h].values()),
        )
        alloc[donor][over] -= 1
        alloc[donor][under] += 1
        current = totals()

    # Fill the splits from a seeded shuffle of each stratum's members.
    out: dict[str, list[int]] = {name: [] for name in SPLIT_NAMES}
    for stratum in sorted(alloc):
        members = np.flatnonzero(strata == stratum)
        members = members[rng.permutation(len(members))]
        start = 0
        for name in SPLIT_NAMES:
            count = alloc[stratum][name]
            out[name].extend(members[start:start + count].tolist())
            start += count
    return {name: np.array(sorted(idx), dtype=np.int64) for name, idx in out.items()}


def generate_dataset(
    n: int,
    ranges: StressRanges | None = None,
    constants: DegradationConstants | None = None,
    noise: NoiseSpec | None = None,
    coupling: float = 0.999,
    min_fraction: float = 0.1,
) -> DatasetSplit:
    """Sample -> degrade -> noise -> stratify -> split, all seeded.

    The result is a pure function of the arguments; the seed lives in
    ``noise.seed`` (see the module docstring for the sub-stream scheme).
    Severity strata are tertiles of the recorded V_in + I_in.
    """
    if n < 10:
        raise ValidationError(f"n must be >= 10, got {n}")
    ranges = ranges if ranges is not None else StressRanges()
    constants = constants if constants is not None else default_constants()
    noise = noise if noise is not None else NoiseSpec()

    stresses = sample_stress(ranges, noise.seed, n, coupling=coupling)
    records = []
    for i, stress in enumerate(stresses):
        out = degrade(stress, constants, min_fraction)
        clean = DegradationRecord(i, stress, out, truth=out)
        records.append(add_noise(clean, noise, constants, min_fraction))

    sums = np.array([r.stress.V_in + r.stress.I_in for r in records])
    strata = _assign_severity_strata(sums)
    split_rng = np.random.default_rng((noise.seed, 0, 1))
    split_indices = _stratified_split_indices(strata, split_rng)

    stamped: dict[str, list[DegradationRecord]] = {name: [] for name in SPLIT_NAMES}
    for name in SPLIT_NAMES:
        for i in split_indices[name]:
            stamped[name].append(
                replace(records[i], stratum=STRATUM_LABELS[strata[i]], split=name)
            )
    labels = tuple(STRATUM_LABELS[s] for s in strata)
    result = DatasetSplit(
        train=tuple(stamped["train"]),
        validation=tuple(stamped["val"]),
        test=tuple(stamped["test"]),
        strata_labels=labels,
    )
    result.validate()
    return result


def _record_to_row(record: DegradationRecord) -> list[str]:
    values = [*record.stress.as_array(), *record.output.as_array()]
    return [
        str(record.record_id),
        *(format(v, ".17g") for v in values),
        record.stratum if record.stratum is not None else "",
        record.split if record.split is not None else "",
    ]


def dataset_to_csv(split: DatasetSplit, stream: io.TextIOBase):
    """Write every record (id order) as CSV with the pinned header."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(DATASET_CSV_HEADER.split(","))
    for record in split.all_records():
        writer.writerow(_record_to_row(record))


def dataset_from_csv(stream: io.TextIOBase) -> DatasetSplit:
    """Inverse of dataset_to_csv; validates header and split labels."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header != DATASET_CSV_HEADER.split(","):
        raise ValidationError(f"unexpected dataset CSV header: {header}")
    by_split: dict[str, list[DegradationRecord]] = {name: [] for name in SPLIT_NAMES}
    labels: list[tuple[int, str]] = []
    for row in reader:
        if len(row) != 18:
            raise ValidationError(f"expected 18 columns, got {len(row)}: {row}")
        record_id = int(row[0])
        stress = StressInput(*(float(v) for v in row[1:10]))
        output = DegradationOutput(*(float(v) for v in row[10:16]))
        stratum, split_name = row[16], row[17]
        if split_name not in SPLIT_NAMES:
            raise ValidationError(f"unknown split label {split_name!r}")
        record = DegradationRecord(
            record_id, stress, output, stratum=stratum, split=split_name
        )
        by_split[split_name].append(record)
        labels.append((record_id, stratum))
    labels.sort()
    result = DatasetSplit(
        train=tuple(by_split["train"]),
        validation=tuple(by_split["val"]),
        test=tuple(by_split["test"]),
        strata_labels=tuple(label for _, label in labels),
    )
    result.validate()
    return result
