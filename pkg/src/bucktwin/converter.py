"""Fixed-step switching simulation of an open-loop DC-DC buck converter.

The power stage is modeled with parasitic elements: inductor ESR r_L,
capacitor ESR r_C, switch on-resistance r_ds_on, and a constant-drop
freewheeling diode. State is (i_L, v_C); the output voltage is obtained
algebraically each step from the capacitor/ESR/load divider:

    v_o = (v_C + r_C * i_L) * R / (R + r_C)

Conduction modes per sample:
    S  switch on:   di_L/dt = (V_in - i_L*(r_ds_on + r_L) - v_o) / L
    D  diode on:    di_L/dt = (-V_diode - i_L*r_L - v_o) / L
    I  idle (DCM):  i_L held at exactly zero until the next switch-on edge

The capacitor integrates dv_C/dt = (i_L - v_o/R) / C in every mode.
Discontinuous conduction arises naturally from the diode constraint: when
the freewheeling current would cross below zero it is clamped to zero and
held. Inductor current is clamped non-negative in all modes; the switch
path is treated as unidirectional, so startup ringing with v_o > V_in
cannot drive i_L below zero.

Integration is explicit forward Euler on a fixed grid. Switching edges are
snapped to the grid, so dt should divide both D*T_sw and T_sw (the default
dt = T_sw/1000 does for the default duty ratio).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InstabilityError, ValidationError

MODE_SWITCH_ON = 0
MODE_DIODE_ON = 1
MODE_IDLE = 2

_MODE_LETTERS = np.array(["S", "D", "I"])


@dataclass(frozen=True)
class ConverterParams:
    """Electrical parameters of the buck converter, parasitics included."""

    L: float            # inductance, H
    C: float            # capacitance, F
    r_L: float          # inductor ESR, ohm
    r_C: float          # capacitor ESR, ohm
    r_ds_on: float      # switch on-resistance, ohm
    V_in: float         # input voltage, V
    R_load: float       # load resistance, ohm
    f_sw: float         # switching frequency, Hz
    D: float            # duty ratio, 0 < D < 1
    V_diode: float = 0.7  # diode forward drop, V

    def validate(self):
        if not (self.L > 0 and self.C > 0 and self.R_load > 0 and self.f_sw > 0):
            raise ValidationError(
                "L, C, R_load and f_sw must all be positive, got "
                f"L={self.L}, C={self.C}, R_load={self.R_load}, f_sw={self.f_sw}"
            )
        if self.r_L < 0 or self.r_C < 0 or self.r_ds_on < 0 or self.V_diode < 0:
            raise ValidationError("parasitic resistances and V_diode must be >= 0")
        if not 0.0 < self.D < 1.0:
            raise ValidationError(f"duty ratio must lie strictly in (0, 1), got D={self.D}")

    @property
    def T_sw(self) -> float:
        return 1.0 / self.f_sw

    def replace(self, **changes) -> "ConverterParams":
        from dataclasses import replace

        return replace(self, **changes)


def table_defaults() -> ConverterParams:
    """Nominal operating point: 25 V in, 100 ohm load, 100 uH, 220 uF,
    50% duty at 10 kHz, with typical parasitic values."""
    return ConverterParams(
        L=100e-6,
        C=220e-6,
        r_L=0.2,
        r_C=0.15,
        r_ds_on=0.1,
        V_in=25.0,
        R_load=100.0,
        f_sw=10e3,
        D=0.5,
        V_diode=0.7,
    )


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. dt must give at least 100 steps per period."""

    dt: float = 1e-7
    n_periods: int = 200
    settle_periods: int = 150
    initial_state: tuple[float, float] = (0.0, 0.0)  # (i_L0, v_C0)

    def validate(self, params: ConverterParams):
        if self.dt <= 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        t_sw = params.T_sw
        if self.dt > t_sw / 100.0 * (1 + 1e-12):
            raise ValidationError(
                f"dt={self.dt} exceeds T_sw/100={t_sw / 100.0}; need >= 100 steps per period"
            )
        if self.settle_periods >= self.n_periods:
            raise ValidationError(
                f"settle_periods={self.settle_periods} must be < n_periods={self.n_periods}"
            )
        if self.n_periods < 1:
            raise ValidationError("n_periods must be >= 1")

    def steps_per_period(self, params: ConverterParams) -> int:
        return int(round(params.T_sw / self.dt))


@dataclass
class SimTrace:
    """Uniformly sampled converter waveforms plus per-sample conduction mode."""

    t: np.ndarray
    v_o: np.ndarray
    i_L: np.ndarray
    v_C: np.ndarray
    mode_flags: np.ndarray  # uint8, MODE_SWITCH_ON / MODE_DIODE_ON / MODE_IDLE

    def __post_init__(self):
        n = len(self.t)
        if n < 2:
            raise ValidationError("trace must contain at least 2 samples")
        for name in ("v_o", "i_L", "v_C", "mode_flags"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"trace array {name} length mismatch")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class RippleMetrics:
    """Peak-to-peak ripple and averages over the steady-state window."""

    v_ripple_pp: float
    i_ripple_pp: float
    v_o_avg: float
    i_L_avg: float
    mode: str  # "DCM" | "CCM"

    def to_dict(self) -> dict:
        return {
            "v_ripple_pp": self.v_ripple_pp,
            "i_ripple_pp": self.i_ripple_pp,
            "v_o_avg": self.v_o_avg,
            "i_L_avg": self.i_L_avg,
            "mode": self.mode,
        }


@njit(cache=True)
def _step_kernel(n_steps, spp, on_steps, dt, L, C, r_L, r_C, r_ds, V_in, R, V_d,
                 i_l0, v_c0, i_out, vc_out, vo_out, mode_out):
    """Forward-Euler stepping loop. Returns -1 on success, else the index of
    the first non-finite sample."""
    i_l = i_l0
    v_c = v_c0
    div = R / (R + r_C)
    idle = False
    for k in range(n_steps):
        pos = k % spp
        on = pos < on_steps
        if pos == 0:
            idle = False
        v_o = (v_c + r_C * i_l) * div
        i_out[k] = i_l
        vc_out[k] = v_c
        vo_out[k] = v_o
        if on:
            mode_out[k] = 0
            di = (V_in - i_l * (r_ds + r_L) - v_o) / L
        elif idle:
            mode_out[k] = 2
            di = 0.0
        else:
            mode_out[k] = 1
            di = (-V_d - i_l * r_L - v_o) / L
        dv = (i_l - v_o / R) / C
        i_next = i_l + dt * di
        if i_next <= 0.0:
            i_next = 0.0
            if not on:
                idle = True
        i_l = i_next
        v_c = v_c + dt * dv
        if pos == spp - 1:
            if not (np.isfinite(i_l) and np.isfinite(v_c)):
                return k
    if not (np.isfinite(i_l) and np.isfinite(v_c)):
        return n_steps - 1
    return -1


def _run_sim_arrays(params: ConverterParams, config: SimConfig):
    """Allocate output arrays and run the kernel. No validation; callers in
    hot loops (swarm objectives) validate once up front."""
    spp = config.steps_per_period(params)
    on_steps = int(round(params.D * params.T_sw / config.dt))
    n_steps = config.n_periods * spp
    i_out = np.empty(n_steps)
    vc_out = np.empty(n_steps)
    vo_out = np.empty(n_steps)
    mode_out = np.empty(n_steps, dtype=np.uint8)
    bad = _step_kernel(
        n_steps, spp, on_steps, config.dt,
        params.L, params.C, params.r_L, params.r_C, params.r_ds_on,
        params.V_in, params.R_load, params.V_diode,
        float(config.initial_state[0]), float(config.initial_state[1]),
        i_out, vc_out, vo_out, mode_out,
    )
    if bad >= 0:
        raise InstabilityError(
            f"non-finite state detected at step {bad} (t={bad * config.dt:.6e} s); "
            "reduce dt or check parameters", step=int(bad),
        )
    return i_out, vc_out, vo_out, mode_out


def simulate(params: ConverterParams, config: SimConfig) -> SimTrace:
    """Simulate the converter for config.n_periods switching periods.

    Returns n_periods * (T_sw/dt) samples starting at t = 0 with the given
    initial state. Raises InstabilityError naming the offending step if the
    state goes non-finite, ValidationError on bad inputs.
    """
    params.validate()
    config.validate(params)
    i_out, vc_out, vo_out, mode_out = _run_sim_arrays(params, config)
    t = np.arange(len(i_out)) * config.dt
    return SimTrace(t=t, v_o=vo_out, i_L=i_out, v_C=vc_out, mode_flags=mode_out)


def _window_start(trace: SimTrace, config: SimConfig) -> tuple[int, int]:
    n = len(trace)
    if n % config.n_periods != 0:
        raise ValidationError(
            f"trace length {n} is not a whole number of the {config.n_periods} configured periods"
        )
    spp = n // config.n_periods
    return config.settle_periods * spp, spp


def measure_ripple(trace: SimTrace, config: SimConfig) -> RippleMetrics:
    """Peak-to-peak ripple and averages over the post-settle window.

    Mode is DCM if the window contains any idle sample, else CCM.
    """
    start, _ = _window_start(trace, config)
    if start >= len(trace):
        raise ValidationError("measurement window is empty; settle_periods too large")
    v = trace.v_o[start:]
    i = trace.i_L[start:]
    dcm = bool(np.any(trace.mode_flags[start:] == MODE_IDLE))
    return RippleMetrics(
        v_ripple_pp=float(v.max() - v.min()),
        i_ripple_pp=float(i.max() - i.min()),
        v_o_avg=float(v.mean()),
        i_L_avg=float(i.mean()),
        mode="DCM" if dcm else "CCM",
    )


def steady_state_periodicity(trace: SimTrace, config: SimConfig) -> float:
    """Max |v_o| difference between the last period and the one before it.

    Near zero once the trace has settled onto a periodic orbit; tests use it
    to assert the settle window is long enough.
    """
    _, spp = _window_start(trace, config)
    if config.n_periods - config.settle_periods < 2:
        raise ValidationError("need at least 2 periods after settling to compare")
    last = trace.v_o[-spp:]
    prev = trace.v_o[-2 * spp:-spp]
    return float(np.max(np.abs(last - prev)))


def trace_to_csv(trace: SimTrace) -> str:
    """Serialize a trace with header t,v_o,i_L,v_C,mode (mode in {S,D,I})."""
    buf = io.StringIO()
    buf.write("t,v_o,i_L,v_C,mode\n")
    letters = _MODE_LETTERS[trace.mode_flags]
    for k in range(len(trace)):
        buf.write(
            f"{trace.t[k]:.10e},{trace.v_o[k]:.10e},{trace.i_L[k]:.10e},"
            f"{trace.v_C[k]:.10e},{letters[k]}\n"
        )
    return buf.getvalue()


def trace_from_csv(text: str) -> SimTrace:
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != "t,v_o,i_L,v_C,mode":
        raise ValidationError("trace CSV must start with header 't,v_o,i_L,v_C,mode'")
    rows = [line.split(",") for line in lines[1:]]
    if len(rows) < 2:
        raise ValidationError("trace CSV must contain at least 2 samples")
    letter_to_mode = {"S": MODE_SWITCH_ON, "D": MODE_DIODE_ON, "I": MODE_IDLE}
    try:
        t = np.array([float(r[0]) for r in rows])
        v_o = np.array([float(r[1]) for r in rows])
        i_L = np.array([float(r[2]) for r in rows])
        v_C = np.array([float(r[3]) for r in rows])
        mode = np.array([letter_to_mode[r[4].strip()] for r in rows], dtype=np.uint8)
    except (ValueError, KeyError, IndexError) as exc:
        raise ValidationError(f"malformed trace CSV row: {exc}") from exc
    return SimTrace(t=t, v_o=v_o, i_L=i_L, v_C=v_C, mode_flags=mode)
