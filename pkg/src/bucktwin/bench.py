"""End-to-end benchmark pipeline behind the `bench` subcommand.

Stages, in order:

1. optimization    — seeded SMO-vs-PSO trials on sphere, Rastrigin (4-D),
                     and the converter-identification benchmark, equal
                     budgets per benchmark.
2. dataset         — synthetic degradation dataset from the config.
3. features        — design matrices for train/validation/test splits.
4. training        — the dropout MLP and the random-forest baseline, both
                     evaluated on the held-out test split (regime a).
5. identification-validation — a small set of simulator-generated
                     "measured" traces; SMO identifies each plant's
                     component quartet and the regression models are scored
                     on features built from those identified values
                     (regime b). Reported, not thresholded: it isolates
                     how much an identification front-end costs accuracy.
6. ripple          — converter ripple with each algorithm's best identified
                     parameter set next to the true plant's ripple.
7. failure         — threshold-projection failure report driven by the
                     MLP's predictions on one held-out degraded case.

Every stage draws its seeds from the config, so a persisted config file
reproduces every number in the report. Wall-clock provenance (timestamp)
is the only field that varies between identical runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .benchmarks import analytic_suite
from .config import ExperimentConfig, config_hash
from .converter import ConverterParams, RippleMetrics, measure_ripple, simulate
from .degradation import TARGET_FIELDS, DatasetSplit, generate_dataset
from .errors import BucktwinError
from .failure import rates_from_stress, time_to_failure
from .features import build_design_matrices
from .forest import rf_predict, rf_train
from .identify import (
    DEFAULT_PARAM_NAMES,
    identification_benchmark,
    identification_sim_config,
    identification_smo_config,
    identify_parameters,
)
from .mlp import (
    MlpModel,
    evaluate,
    init_model,
    predict,
    regression_metrics,
    train_arrays,
)
from .pso import pso_optimize
from .smo import smo_optimize
from .swarm import TrialAggregate, run_trials

REPORT_SCHEMA_VERSION = 1

STAGE_ORDER = (
    "optimization",
    "dataset",
    "features",
    "training",
    "identification-validation",
    "ripple",
    "failure",
)


class BenchStageError(BucktwinError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"bench failed at stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ComparisonResult:
    """One benchmark's head-to-head trial batches."""

    name: str
    budget: int
    success_tol: float
    smo: TrialAggregate
    pso: TrialAggregate


@dataclass(frozen=True)
class BenchResult:
    """Everything the bench report serializes, in memory."""

    comparisons: dict[str, ComparisonResult]
    regression: dict
    ripple: dict
    failure: dict
    identified_params: dict[str, dict[str, float]]
    provenance: dict


def _stage(log, name: str):
    if log is not None:
        log(f"[bench] stage: {name}")


def run_comparisons(config: ExperimentConfig) -> dict[str, ComparisonResult]:
    """Equal-budget SMO-vs-PSO trial batches on the three benchmarks."""
    bench = config.bench
    results: dict[str, ComparisonResult] = {}

    suite = analytic_suite(dim=4)
    for name, (objective, bounds, tol) in suite.items():
        smo_cfg = replace(config.smo, max_iterations=bench.analytic_iterations)
        pso_cfg = replace(config.pso, max_iterations=bench.analytic_iterations)
        results[name] = ComparisonResult(
            name=name,
            budget=bench.analytic_iterations,
            success_tol=tol,
            smo=run_trials(smo_optimize, objective, bounds, smo_cfg,
                           bench.n_trials, success_tol=tol),
            pso=run_trials(pso_optimize, objective, bounds, pso_cfg,
                           bench.n_trials, success_tol=tol),
        )

    problem = identification_benchmark(
        nominal=config.converter,
        max_iterations=bench.identification_iterations,
    )
    # No early stopping here: head-to-head at a fixed evaluation budget.
    smo_cfg = replace(config.smo, max_iterations=problem.max_iterations,
                      convergence_tol=0.0)
    pso_cfg = replace(config.pso, max_iterations=problem.max_iterations,
                      convergence_tol=0.0)
    results["identification"] = ComparisonResult(
        name="identification",
        budget=problem.max_iterations,
        success_tol=problem.success_tol,
        smo=run_trials(smo_optimize, problem.objective, problem.bounds, smo_cfg,
                       bench.n_trials, success_tol=problem.success_tol),
        pso=run_trials(pso_optimize, problem.objective, problem.bounds, pso_cfg,
                       bench.n_trials, success_tol=problem.success_tol),
    )
    return results


def _best_identified_params(
    config: ExperimentConfig, comparison: ComparisonResult
) -> dict[str, dict[str, float]]:
    """Re-run each algorithm's best identification trial to recover the
    identified parameter vector (trials are seed-deterministic, so the
    re-run reproduces the recorded cost)."""
    problem = identification_benchmark(
        nominal=config.converter,
        max_iterations=comparison.budget,
    )
    out: dict[str, dict[str, float]] = {}
    for alg_name, optimizer, base in (
        ("smo", smo_optimize, config.smo),
        ("pso", pso_optimize, config.pso),
    ):
        agg: TrialAggregate = getattr(comparison, alg_name)
        best_trial = int(np.argmin(agg.best_costs))
        seed = agg.trials[best_trial]["seed"]
        cfg = base.replace(seed=seed, max_iterations=comparison.budget,
                           convergence_tol=0.0)
        best, _ = optimizer(problem.objective, problem.bounds, cfg)
        out[alg_name] = {
            name: float(v)
            for name, v in zip(problem.param_names, best.position)
        }
    return out


def _ripple_for(params: ConverterParams, config: ExperimentConfig) -> RippleMetrics:
    return measure_ripple(simulate(params, config.sim), config.sim)


def run_ripple_stage(
    config: ExperimentConfig, identified: dict[str, dict[str, float]]
) -> dict:
    """Converter ripple under each identified parameter set and the plant."""
    problem = identification_benchmark(nominal=config.converter)
    sets = {"plant": problem.plant}
    for alg_name, values in identified.items():
        sets[alg_name] = replace(problem.plant, **values)
    section: dict = {}
    for set_name, params in sets.items():
        metrics = _ripple_for(params, config)
        section[set_name] = {
            "params": {
                name: float(getattr(params, name)) for name in DEFAULT_PARAM_NAMES
            },
            "v_ripple_pp": metrics.v_ripple_pp,
            "i_ripple_pp": metrics.i_ripple_pp,
            "v_o_avg": metrics.v_o_avg,
            "i_L_avg": metrics.i_L_avg,
            "mode": metrics.mode,
        }
    smo_v, pso_v = section["smo"]["v_ripple_pp"], section["pso"]["v_ripple_pp"]
    smo_i, pso_i = section["smo"]["i_ripple_pp"], section["pso"]["i_ripple_pp"]
    section["smo_vs_pso_relative"] = {
        "v_ripple_pp": (pso_v - smo_v) / pso_v if pso_v else 0.0,
        "i_ripple_pp": (pso_i - smo_i) / pso_i if pso_i else 0.0,
    }
    return section


def run_identification_validation(
    config: ExperimentConfig,
    dataset: DatasetSplit,
    x_test: np.ndarray,
    y_test: np.ndarray,
    model: MlpModel,
    forest,
) -> dict:
    """Regime-b scoring: identified component values replace the measured
    ones in the feature vector for a small batch of held-out cases."""
    k = min(config.bench.validation_cases, len(dataset.test))
    x_cases = x_test[:k].copy()
    y_cases = y_test[:k]
    sim_config = identification_sim_config(config.converter)
    problem_bounds = identification_benchmark(nominal=config.converter).bounds
    for i in range(k):
        record = dataset.test[i]
        plant = replace(
            config.converter,
            L=record.output.L,
            C=record.output.C,
            r_L=record.output.r_L,
            r_C=record.output.r_C,
            r_ds_on=record.output.r_ds_on,
        )
        measured = simulate(plant, sim_config)
        opt_config = identification_smo_config(
            seed=config.smo.seed + 1000 + i,
            max_iterations=config.bench.identification_iterations,
        ).replace(population=config.smo.population)
        fitted, _ = identify_parameters(
            measured,
            config.converter,
            problem_bounds,
            optimizer="smo",
            opt_config=opt_config,
            sim_config=sim_config,
        )
        for column, name in enumerate(DEFAULT_PARAM_NAMES):
            x_cases[i, column] = getattr(fitted, name)

    out = {"n_cases": k}
    y_dnn = predict(model, x_cases)
    out["dnn"] = regression_metrics(y_cases, y_dnn, TARGET_FIELDS).to_dict()
    out["rf"] = regression_metrics(
        y_cases, rf_predict(forest, x_cases), TARGET_FIELDS
    ).to_dict()
    return out


def run_failure_stage(
    config: ExperimentConfig,
    dataset: DatasetSplit,
    x_test: np.ndarray,
    model: MlpModel,
) -> dict:
    """Threshold-projection failure report for one held-out degraded case,
    driven by the regression model's predicted component values."""
    record = dataset.test[0]
    predicted = predict(model, x_test[0])
    names = ("L", "C", "r_L", "r_C", "r_ds_on")
    # Forecast consumers live in physical space: floor at a tiny positive.
    values = {n: float(max(v, 1e-12)) for n, v in zip(names, predicted)}
    current = replace(record.output, t_failure=record.output.t_failure, **values)
    rates = rates_from_stress(record, config.dataset.constants)
    report = time_to_failure(
        current, rates, config.dataset.constants, config.thresholds
    )
    return {
        "record_id": record.record_id,
        "true_t_failure_hours": float(record.output.t_failure),
        "predicted_params": values,
        "rates_per_hour": {n: float(r) for n, r in rates.items()},
        **report.to_dict(),
    }


def run_bench(config: ExperimentConfig, log=None) -> BenchResult:
    """Run the full pipeline; any stage failure raises BenchStageError."""
    config.validate()
    started = time.time()

    stage = "optimization"
    try:
        _stage(log, stage)
        comparisons = run_comparisons(config)
        identified = _best_identified_params(
            config, comparisons["identification"]
        )

        stage = "dataset"
        _stage(log, stage)
        dataset = generate_dataset(
            config.dataset.n,
            ranges=config.dataset.ranges,
            constants=config.dataset.constants,
            noise=config.dataset.noise,
            coupling=config.dataset.coupling,
            min_fraction=config.dataset.min_fraction,
        )

        stage = "features"
        _stage(log, stage)
        kwargs = dict(
            operating=config.converter,
            sim=config.sim,
            noise=config.dataset.noise,
        )
        x_train, y_train = build_design_matrices(dataset.train, **kwargs)
        x_val, y_val = build_design_matrices(dataset.validation, **kwargs)
        x_test, y_test = build_design_matrices(dataset.test, **kwargs)

        stage = "training"
        _stage(log, stage)
        model = init_model(
            layer_sizes=config.model.layer_sizes,
            seed=config.model.seed,
            dropout_rates=config.model.dropout,
            init_scale=config.model.init_scale,
        )
        model, history = train_arrays(
            model, x_train, y_train, x_val, y_val, config.train
        )
        forest = rf_train(x_train, y_train, config.forest)
        regression = {
            "synthetic_test": {
                "dnn": evaluate(model, x_test, y_test).to_dict(),
                "rf": regression_metrics(
                    y_test, rf_predict(forest, x_test), TARGET_FIELDS
                ).to_dict(),
            }
        }

        stage = "identification-validation"
        _stage(log, stage)
        regression["identified_validation"] = run_identification_validation(
            config, dataset, x_test, y_test, model, forest
        )

        stage = "ripple"
        _stage(log, stage)
        ripple = run_ripple_stage(config, identified)

        stage = "failure"
        _stage(log, stage)
        failure = run_failure_stage(config, dataset, x_test, model)
    except BucktwinError as exc:
        raise BenchStageError(stage, exc)
    except (OSError, FloatingPointError, ValueError) as exc:
        raise BenchStageError(stage, exc)

    provenance = {
        "config_hash": config_hash(config),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "wall_time_seconds": round(time.time() - started, 3),
        "n_trials": config.bench.n_trials,
        "budgets": {
            name: result.budget for name, result in comparisons.items()
        },
        "trial_seed_base": {"smo": config.smo.seed, "pso": config.pso.seed},
        "best_epoch": history.best_epoch,
    }
    return BenchResult(
        comparisons=comparisons,
        regression=regression,
        ripple=ripple,
        failure=failure,
        identified_params=identified,
        provenance=provenance,
    )


def report_dict(result: BenchResult) -> dict:
    """The report.json payload."""
    smo_vs_pso = {}
    for name, comparison in result.comparisons.items():
        smo_vs_pso[name] = {
            "budget": comparison.budget,
            "success_tol": comparison.success_tol,
            "smo": _aggregate_dict(comparison.smo),
            "pso": _aggregate_dict(comparison.pso),
        }
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "smo_vs_pso": smo_vs_pso,
        "regression": result.regression,
        "ripple": result.ripple,
        "failure": result.failure,
        "provenance": result.provenance,
    }


def _aggregate_dict(agg: TrialAggregate) -> dict:
    return {
        "success_rate": agg.success_rate,
        "mean_iterations": agg.mean_iterations,
        "violations": agg.total_violations,
        "final_costs": [float(c) for c in agg.best_costs],
    }


def convergence_rows(result: BenchResult) -> list[tuple]:
    """(benchmark, algorithm, trial, seed, iteration, best_cost) rows."""
    rows = []
    for name, comparison in result.comparisons.items():
        for alg_name in ("smo", "pso"):
            agg: TrialAggregate = getattr(comparison, alg_name)
            for trial in agg.trials:
                for iteration, cost in enumerate(trial["history"], start=1):
                    rows.append(
                        (name, alg_name, trial["trial"], trial["seed"],
                         iteration, cost)
                    )
    return rows


def ripple_rows(result: BenchResult) -> list[tuple]:
    """(param_set, L, C, r_L, r_C, v_ripple_pp, i_ripple_pp, mode) rows."""
    rows = []
    for set_name in ("plant", "smo", "pso"):
        entry = result.ripple[set_name]
        p = entry["params"]
        rows.append(
            (set_name, p["L"], p["C"], p["r_L"], p["r_C"],
             entry["v_ripple_pp"], entry["i_ripple_pp"], entry["mode"])
        )
    return rows


def metrics_rows(result: BenchResult) -> list[tuple]:
    """(regime, model, output, mse, r2) rows."""
    rows = []
    for regime, models in result.regression.items():
        for model_name in ("dnn", "rf"):
            metrics = models[model_name]
            for output, entry in metrics.items():
                if not isinstance(entry, dict):
                    continue  # overall_mse scalar
                rows.append(
                    (regime, model_name, output, entry["mse"], entry["r2"])
                )
    return rows
