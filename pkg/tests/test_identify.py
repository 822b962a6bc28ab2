"""Parameter-identification tests: plant-and-recover oracles, noisy
recovery, infeasible bounds, and the head-to-head benchmark contract."""

import numpy as np
import pytest

from bucktwin.converter import SimConfig, SimTrace, simulate, table_defaults
from bucktwin.errors import ValidationError
from bucktwin.identify import (
    default_bounds,
    identification_benchmark,
    identification_pso_config,
    identification_sim_config,
    identification_smo_config,
    identify_parameters,
    make_objective,
    recovery_tolerance,
)
from bucktwin.swarm import Bounds

PARAMS = ("L", "C", "r_L", "r_C")


def param_vector(p):
    return np.array([getattr(p, n) for n in PARAMS])


@pytest.fixture(scope="module")
def plant_setup():
    plant = table_defaults()
    config = identification_sim_config(plant)
    measured = simulate(plant, config)
    return plant, config, measured


class TestNoiselessRecovery:
    def test_nominal_plant_recovered_within_two_percent(self, plant_setup):
        plant, config, measured = plant_setup
        fitted, stats = identify_parameters(
            measured, plant, default_bounds(plant), "smo",
            identification_smo_config(seed=0))
        rel = np.abs(param_vector(fitted) - param_vector(plant)) / param_vector(plant)
        print(f"recovery rel err: {dict(zip(PARAMS, (f'{r:.4%}' for r in rel)))}")
        assert rel.max() < 0.02, f"worst parameter off by {rel.max():.2%}"
        assert stats.iterations_used <= 200

    def test_operating_point_survives_into_result(self, plant_setup):
        plant, config, measured = plant_setup
        fitted, _ = identify_parameters(
            measured, plant, default_bounds(plant), "smo",
            identification_smo_config(seed=0, max_iterations=5))
        for name in ("V_in", "R_load", "f_sw", "D", "V_diode", "r_ds_on"):
            assert getattr(fitted, name) == getattr(plant, name)


class TestNoisyRecovery:
    def test_centivolt_noise_recovered_within_five_percent(self, plant_setup):
        plant, config, clean = plant_setup
        rng = np.random.default_rng(77)
        noisy = SimTrace(
            t=clean.t,
            v_o=clean.v_o + rng.normal(0.0, 0.01, len(clean)),
            i_L=clean.i_L.copy(),
            v_C=clean.v_C.copy(),
            mode_flags=clean.mode_flags.copy(),
        )
        fitted, _ = identify_parameters(
            noisy, plant, default_bounds(plant), "smo",
            identification_smo_config(seed=0))
        rel = np.abs(param_vector(fitted) - param_vector(plant)) / param_vector(plant)
        assert rel.max() < 0.05, f"noisy recovery off by {rel.max():.2%}"


class TestInfeasiblePlant:
    def test_excluded_inductance_floors_above_recovery_cost(self, plant_setup):
        plant, config, measured = plant_setup
        # recoverable run first, to establish the in-bounds cost floor
        _, good = identify_parameters(
            measured, plant, default_bounds(plant), "smo",
            identification_smo_config(seed=0))
        # now a box whose L range excludes the planted value entirely
        lo = param_vector(plant) * 0.5
        hi = param_vector(plant) * 1.5
        lo[0] = plant.L * 1.2
        bad_bounds = Bounds(lo, hi)
        _, excluded = identify_parameters(
            measured, plant, bad_bounds, "smo",
            identification_smo_config(seed=0))
        floor = good.best_cost_history[-1]
        stuck = excluded.best_cost_history[-1]
        print(f"cost floor={floor:.3e}, excluded-plant best={stuck:.3e}")
        assert stuck > floor * 100, "excluding the plant must leave a clear cost gap"


class TestObjectiveContract:
    def test_rejects_mismatched_trace_length(self, plant_setup):
        plant, config, measured = plant_setup
        short = SimConfig(dt=config.dt, n_periods=5, settle_periods=0)
        with pytest.raises(ValidationError):
            make_objective(measured, plant, short)

    def test_rejects_unknown_optimizer(self, plant_setup):
        plant, config, measured = plant_setup
        with pytest.raises(ValidationError):
            identify_parameters(measured, plant, default_bounds(plant), "annealing")

    def test_rejects_bounds_dim_mismatch(self, plant_setup):
        plant, config, measured = plant_setup
        three = Bounds(np.ones(3), np.ones(3) * 2)
        with pytest.raises(ValidationError):
            identify_parameters(measured, plant, three, "smo")

    def test_unstable_candidate_costs_infinity(self, plant_setup):
        plant, config, measured = plant_setup
        obj = make_objective(measured, plant, config)
        # picoscale LC tank at this step size blows Euler up instantly
        cost = obj(np.array([1e-12, 1e-12, plant.r_L, plant.r_C]))
        assert cost == float("inf")

    def test_matching_parameters_cost_zero(self, plant_setup):
        plant, config, measured = plant_setup
        obj = make_objective(measured, plant, config)
        assert obj(param_vector(plant)) == 0.0


class TestRecoveryTolerance:
    def test_positive_and_scales_with_error(self, plant_setup):
        plant, config, _ = plant_setup
        t2 = recovery_tolerance(plant, config, rel=0.02)
        t5 = recovery_tolerance(plant, config, rel=0.05)
        assert 0 < t2 < t5


class TestBenchmarkDefinition:
    def test_benchmark_is_reproducible_and_wellformed(self):
        a = identification_benchmark()
        b = identification_benchmark()
        assert np.array_equal(a.measured.v_o, b.measured.v_o)
        assert a.success_tol == b.success_tol > 0
        assert a.bounds.dim == len(a.param_names) == 4
        # the degraded plant sits inside the search box
        planted = np.array([getattr(a.plant, n) for n in a.param_names])
        assert np.all(planted > a.bounds.lower) and np.all(planted < a.bounds.upper)

    def test_plant_cost_is_zero_noiseless(self):
        bench = identification_benchmark()
        planted = np.array([getattr(bench.plant, n) for n in bench.param_names])
        assert bench.objective(planted) == 0.0

    def test_both_algorithms_beat_tolerance_at_benchmark_budget(self):
        from bucktwin.pso import pso_optimize
        from bucktwin.smo import smo_optimize

        bench = identification_benchmark()
        smo_cfg = identification_smo_config(seed=3, convergence_tol=0.0,
                                            max_iterations=bench.max_iterations)
        pso_cfg = identification_pso_config(seed=3, convergence_tol=0.0,
                                            max_iterations=bench.max_iterations)
        sb, _ = smo_optimize(bench.objective, bench.bounds, smo_cfg)
        pb, _ = pso_optimize(bench.objective, bench.bounds, pso_cfg)
        print(f"benchmark costs at budget: smo={sb.cost:.2e} pso={pb.cost:.2e} "
              f"tol={bench.success_tol:.2e}")
        assert sb.cost <= bench.success_tol
