"""Command-line harness: simulate, synth, identify, train, bench.

One JSON config file (see ``schemas/config.schema.json``) drives every
command; flags override file values. Outputs are plot-ready CSV and JSON —
every JSON document validates against a versioned schema shipped in
``bucktwin/schemas/``.

Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
inputs), 2 runtime/numerical error, 3 I/O error. A failing command removes
any output files it had already written, so an output directory never holds
a partial result set.

Seeding: ``--seed N`` overrides every section seed in the config (dataset
noise, model init, training, forest, SMO, PSO) with N, making one flag
sufficient for a fully reproducible variant run.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bench import (
    BenchStageError,
    convergence_rows,
    metrics_rows,
    report_dict,
    ripple_rows,
    run_bench,
)
from .config import (
    ExperimentConfig,
    config_hash,
    default_config,
    load_config,
)
from .converter import measure_ripple, simulate, trace_from_csv, trace_to_csv
from .degradation import TARGET_FIELDS, dataset_to_csv, generate_dataset
from .errors import BucktwinError, ValidationError
from .features import build_design_matrices
from .forest import rf_predict, rf_train, save_forest
from .identify import (
    identification_pso_config,
    identification_sim_config,
    identification_smo_config,
    identify_parameters,
)
from .mlp import evaluate, init_model, regression_metrics, save_model, train_arrays
from .swarm import Bounds

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


class OutputSchemaError(BucktwinError):
    """An output payload failed its own shipped schema (internal bug)."""


class _UsageError(ValidationError):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def load_schema(name: str) -> dict:
    path = resources.files("bucktwin.schemas").joinpath(f"{name}.schema.json")
    return json.loads(path.read_text(encoding="utf-8"))


def _check_schema(payload: dict, schema_name: str, *, user_input: bool = False):
    try:
        jsonschema.validate(payload, load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        message = f"{schema_name} schema violation at {where}: {exc.message}"
        if user_input:
            raise ValidationError(message)
        raise OutputSchemaError(message)


class _OutputSet:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.paths: list[Path] = []

    def _open(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        self.paths.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._open(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_json(self, name: str, payload: dict, schema_name: str) -> Path:
        _check_schema(payload, schema_name)
        return self.write_text(
            name, json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )

    def write_csv(self, name: str, header: tuple, rows) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self.write_text(name, buffer.getvalue())

    def discard(self):
        for path in self.paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass


def _parse_overrides(pairs: list[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        if "=" not in pair:
            raise _UsageError(f"--set expects name=value, got '{pair}'")
        name, _, raw = pair.partition("=")
        try:
            out[name.strip()] = float(raw)
        except ValueError:
            raise _UsageError(f"--set {name}: '{raw}' is not a number")
    return out


def _resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as stream:
            try:
                raw = json.load(stream)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config file is not valid JSON: {exc}")
        _check_schema(raw, "config", user_input=True)
        config = load_config(args.config)
    else:
        config = default_config()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file (defaults used when omitted)")
    common.add_argument("--seed", type=int, metavar="INT",
                        help="override every section seed in the config")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides config output_dir)")

    parser = _Parser(
        prog="bucktwin",
        description="Digital-twin pipeline for a parasitic-aware buck "
                    "converter: simulation, synthetic degradation data, "
                    "swarm-based parameter identification, regression "
                    "models, and failure forecasting.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common],
                       help="run the switching simulator; write trace.csv + ripple.json")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="override a converter parameter (repeatable), e.g. --set D=0.4")
    p.add_argument("--profile", choices=["table", "identification"], default="table",
                   help="simulation grid: 'table' uses the config sim section; "
                        "'identification' uses the short startup-transient window "
                        "that the identify command expects")

    p = sub.add_parser("synth", parents=[common],
                       help="generate the synthetic degradation dataset; write dataset.csv")
    p.add_argument("--n", type=int, default=None, metavar="INT",
                   help="number of records (overrides config dataset.n)")

    p = sub.add_parser("identify", parents=[common],
                       help="fit L, C, r_L, r_C to a measured trace; "
                            "write identified_params.json + identification_stats.json")
    p.add_argument("--trace", required=True, metavar="PATH",
                   help="measured trace CSV (simulate --profile identification "
                        "produces a compatible file)")
    p.add_argument("--algorithm", choices=["smo", "pso"], default="smo")

    p = sub.add_parser("train", parents=[common],
                       help="train a regression model on the synthetic dataset; "
                            "write a checkpoint + metrics JSON")
    p.add_argument("--model", choices=["dnn", "rf"], default="dnn")
    p.add_argument("--dataset", metavar="PATH", default=None,
                   help="dataset CSV to cross-check against the config's generator "
                        "(training targets need ground truth, which a CSV does not "
                        "carry, so the dataset is regenerated from the config and "
                        "must match this file)")

    sub.add_parser("bench", parents=[common],
                   help="run the full benchmark pipeline; write report.json, "
                        "convergence.csv, ripple.csv, metrics.csv")
    return parser


def _cmd_simulate(config: ExperimentConfig, args) -> int:
    overrides = _parse_overrides(args.set)
    try:
        params = replace(config.converter, **overrides)
    except TypeError:
        valid = [f.name for f in dataclasses.fields(config.converter)]
        raise ValidationError(
            f"--set accepts converter parameters {valid}, got {sorted(overrides)}"
        )
    params.validate()
    sim = config.sim if args.profile == "table" else identification_sim_config(params)
    sim.validate(params)
    trace = simulate(params, sim)
    metrics = measure_ripple(trace, sim)
    payload = {
        "schema_version": 1,
        **metrics.to_dict(),
        "config_hash": config_hash(config),
    }
    if overrides:
        payload["overrides"] = overrides
    outputs = _OutputSet(Path(config.output_dir))
    try:
        outputs.write_text("trace.csv", trace_to_csv(trace))
        outputs.write_json("ripple.json", payload, "ripple")
    except BaseException:
        outputs.discard()
        raise
    print(
        f"simulate: {len(trace.t)} samples, mode={metrics.mode}, "
        f"v_ripple_pp={metrics.v_ripple_pp:.6g} V, "
        f"i_ripple_pp={metrics.i_ripple_pp:.6g} A -> {outputs.directory}"
    )
    return EXIT_OK


def _generate_from_config(config: ExperimentConfig, n: int | None = None):
    d = config.dataset
    return generate_dataset(
        n if n is not None else d.n,
        ranges=d.ranges,
        constants=d.constants,
        noise=d.noise,
        coupling=d.coupling,
        min_fraction=d.min_fraction,
    )


def _cmd_synth(config: ExperimentConfig, args) -> int:
    if args.n is not None and args.n < 1:
        raise ValidationError(f"--n must be >= 1, got {args.n}")
    split = _generate_from_config(config, args.n)
    buffer = io.StringIO()
    dataset_to_csv(split, buffer)
    outputs = _OutputSet(Path(config.output_dir))
    try:
        outputs.write_text("dataset.csv", buffer.getvalue())
    except BaseException:
        outputs.discard()
        raise
    print(
        f"synth: {len(split.train)} train / {len(split.validation)} validation / "
        f"{len(split.test)} test records -> {outputs.directory / 'dataset.csv'}"
    )
    return EXIT_OK


def _cmd_identify(config: ExperimentConfig, args) -> int:
    with open(args.trace, "r", encoding="utf-8") as stream:
        measured = trace_from_csv(stream.read())
    nominal = config.converter
    sim = identification_sim_config(nominal)
    center = np.array([getattr(nominal, n) for n in ("L", "C", "r_L", "r_C")])
    bounds = Bounds(center * 0.1, center * 3.0)
    # The identification recipes run the full budget (no absolute-cost early
    # stop — waveform costs sit many decades below a generic tolerance) with
    # swarm settings tuned for the shallow parasitic-resistance valleys.
    # Population, budget, and seed still come from the config.
    if args.algorithm == "smo":
        opt_config = identification_smo_config(
            seed=config.smo.seed, max_iterations=config.smo.max_iterations
        ).replace(population=config.smo.population)
    else:
        opt_config = identification_pso_config(
            seed=config.pso.seed, max_iterations=config.pso.max_iterations
        ).replace(population=config.pso.population)
    fitted, stats = identify_parameters(
        measured, nominal, bounds,
        optimizer=args.algorithm, opt_config=opt_config, sim_config=sim,
    )
    params_payload = {
        "schema_version": 1,
        "algorithm": args.algorithm,
        "params": {
            name: float(getattr(fitted, name)) for name in ("L", "C", "r_L", "r_C")
        },
        "final_cost": float(stats.best_cost_history[-1]),
        "config_hash": config_hash(config),
    }
    stats_payload = {"schema_version": 1, **stats.to_dict()}
    outputs = _OutputSet(Path(config.output_dir))
    try:
        outputs.write_json("identified_params.json", params_payload, "identified_params")
        outputs.write_json("identification_stats.json", stats_payload, "trial_stats")
    except BaseException:
        outputs.discard()
        raise
    fitted_str = ", ".join(
        f"{k}={v:.6g}" for k, v in params_payload["params"].items()
    )
    print(
        f"identify[{args.algorithm}]: {fitted_str}; "
        f"cost={params_payload['final_cost']:.6g} "
        f"after {stats.iterations_used} iterations -> {outputs.directory}"
    )
    return EXIT_OK


def _cmd_train(config: ExperimentConfig, args) -> int:
    split = _generate_from_config(config)
    if args.dataset is not None:
        with open(args.dataset, "r", encoding="utf-8") as stream:
            provided = stream.read()
        buffer = io.StringIO()
        dataset_to_csv(split, buffer)
        if provided != buffer.getvalue():
            raise ValidationError(
                "dataset file does not match this config's generator output; "
                "training targets need ground truth, which only the in-process "
                "generator provides, so the file must be the config's own "
                "synth output"
            )
    kwargs = dict(operating=config.converter, sim=config.sim,
                  noise=config.dataset.noise)
    x_train, y_train = build_design_matrices(split.train, **kwargs)
    x_test, y_test = build_design_matrices(split.test, **kwargs)

    outputs = _OutputSet(Path(config.output_dir))
    try:
        if args.model == "dnn":
            x_val, y_val = build_design_matrices(split.validation, **kwargs)
            model = init_model(
                layer_sizes=config.model.layer_sizes,
                seed=config.model.seed,
                dropout_rates=config.model.dropout,
                init_scale=config.model.init_scale,
            )
            model, history = train_arrays(
                model, x_train, y_train, x_val, y_val, config.train
            )
            metrics = evaluate(model, x_test, y_test)
            checkpoint = "model_dnn.npz"
            outputs.directory.mkdir(parents=True, exist_ok=True)
            save_model(model, str(outputs.directory / checkpoint))
            outputs.paths.append(outputs.directory / checkpoint)
            best_epoch = history.best_epoch
        else:
            forest = rf_train(x_train, y_train, config.forest)
            metrics = regression_metrics(
                y_test, rf_predict(forest, x_test), TARGET_FIELDS
            )
            checkpoint = "model_rf.npz"
            outputs.directory.mkdir(parents=True, exist_ok=True)
            save_forest(forest, str(outputs.directory / checkpoint))
            outputs.paths.append(outputs.directory / checkpoint)
            best_epoch = None
        payload = {
            "schema_version": 1,
            "model": args.model,
            "outputs": {
                name: {"mse": m, "r2": None if np.isnan(r) else r}
                for name, m, r in zip(metrics.output_names, metrics.mse, metrics.r2)
            },
            "overall_mse": metrics.overall_mse,
            "best_epoch": best_epoch,
            "checkpoint": checkpoint,
            "config_hash": config_hash(config),
        }
        outputs.write_json(f"metrics_{args.model}.json", payload, "metrics")
    except BaseException:
        outputs.discard()
        raise
    r2_str = ", ".join(
        f"{name}={entry['r2']:.5f}" if entry["r2"] is not None else f"{name}=n/a"
        for name, entry in payload["outputs"].items()
    )
    print(f"train[{args.model}]: test R2 {r2_str} -> {outputs.directory}")
    return EXIT_OK


def _cmd_bench(config: ExperimentConfig, args) -> int:
    result = run_bench(config, log=lambda s: print(s, file=sys.stderr))
    report = report_dict(result)
    outputs = _OutputSet(Path(config.output_dir))
    try:
        outputs.write_json("report.json", report, "report")
        outputs.write_csv(
            "convergence.csv",
            ("benchmark", "algorithm", "trial", "seed", "iteration", "best_cost"),
            convergence_rows(result),
        )
        outputs.write_csv(
            "ripple.csv",
            ("param_set", "L", "C", "r_L", "r_C",
             "v_ripple_pp", "i_ripple_pp", "mode"),
            ripple_rows(result),
        )
        outputs.write_csv(
            "metrics.csv",
            ("regime", "model", "output", "mse", "r2"),
            metrics_rows(result),
        )
    except BaseException:
        outputs.discard()
        raise
    ident = report["smo_vs_pso"]["identification"]
    dnn_r2 = [
        entry["r2"]
        for name, entry in report["regression"]["synthetic_test"]["dnn"].items()
        if isinstance(entry, dict)
    ]
    print(
        "bench: identification success "
        f"smo={ident['smo']['success_rate']:.0%} pso={ident['pso']['success_rate']:.0%}; "
        f"violations smo={ident['smo']['violations']} pso={ident['pso']['violations']}; "
        f"min DNN test R2={min(dnn_r2):.5f}; "
        f"v-ripple SMO-vs-PSO rel diff="
        f"{report['ripple']['smo_vs_pso_relative']['v_ripple_pp']:.3%}; "
        f"failure t={report['failure']['t_failure_hours']} h "
        f"(first={report['failure']['first_failing']}) -> {outputs.directory}"
    )
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "synth": _cmd_synth,
    "identify": _cmd_identify,
    "train": _cmd_train,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _resolve_config(args)
        return _COMMANDS[args.command](config, args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except BenchStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, ValidationError):
            return EXIT_VALIDATION
        if isinstance(exc.cause, OSError):
            return EXIT_IO
        return EXIT_RUNTIME
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BucktwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
