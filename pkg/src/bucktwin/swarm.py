"""Shared plumbing for the bound-constrained swarm optimizers.

Both optimizers work on a box search space, clamp every proposal back into
the box (counting one constraint violation per clamped proposal), maximize
fitness = 1/(1 + cost) for non-negative costs, and report per-iteration
best-cost history plus violation counts. A trial-runner repeats seeded runs
and aggregates success rate, mean iterations to tolerance, and violations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ObjectiveError, ValidationError


@dataclass(frozen=True)
class Bounds:
    """Elementwise box constraints for the search space.

    Zero-width dimensions are permitted (degenerate box collapsing the
    search to a point); lower may never exceed upper.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.ndim != 1 or hi.shape != lo.shape:
            raise ValidationError("bounds must be 1-D arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValidationError("bounds must be finite")
        if np.any(lo > hi):
            raise ValidationError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def clamp(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        """Clamp a proposal into the box. Returns (clamped, violated) where
        violated is True if any component was outside."""
        clamped = np.clip(x, self.lower, self.upper)
        return clamped, bool(np.any(clamped != x))

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))


def fitness_from_cost(cost: float) -> float:
    """Monotone cost-to-fitness map: 1/(1+cost) for cost >= 0 (range (0, 1]),
    extended as 1 + |cost| for negative costs so lower cost always means
    higher fitness."""
    if cost >= 0:
        return 1.0 / (1.0 + cost)
    return 1.0 + abs(cost)


@dataclass
class Candidate:
    """A position in the search space with its evaluated cost and fitness."""

    position: np.ndarray
    cost: float

    @property
    def fitness(self) -> float:
        return fitness_from_cost(self.cost)


@dataclass
class TrialStats:
    """Bookkeeping for one optimizer run."""

    best_cost_history: list[float] = field(default_factory=list)
    iterations_used: int = 0
    constraint_violations: int = 0
    success: bool = False
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "iterations": self.iterations_used,
            "violations": self.constraint_violations,
            "best_cost": self.best_cost_history[-1] if self.best_cost_history else None,
            "history": list(self.best_cost_history),
        }


def evaluate_objective(objective, position: np.ndarray) -> float:
    """Call the objective; +inf is a legal "infeasible" marker, NaN is not."""
    value = float(objective(position))
    if math.isnan(value):
        raise ObjectiveError(
            f"objective returned NaN at position {position.tolist()}",
            position=position.copy(),
        )
    return value


class StopWatch:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self._t0
        return False


@dataclass
class TrialAggregate:
    """Summary over a batch of seeded trials of one algorithm."""

    success_rate: float
    mean_iterations: float
    total_violations: int
    best_costs: list[float]
    trials: list[dict]

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "mean_iterations": self.mean_iterations,
            "total_violations": self.total_violations,
            "trials": self.trials,
        }


def iterations_to_tolerance(history: list[float], tol: float, max_iterations: int) -> int:
    """1-based iteration index where the best cost first reached tol, or
    max_iterations if it never did."""
    for k, c in enumerate(history):
        if c <= tol:
            return k + 1
    return max_iterations


def run_trials(optimizer, objective, bounds: Bounds, config, n_trials: int,
               success_tol: float | None = None) -> TrialAggregate:
    """Repeat seeded runs of one optimizer on one objective.

    Trial k runs with seed = config.seed + k so batches are reproducible yet
    trials are distinct. Success per trial means the best cost reached the
    tolerance: success_tol when given (judged after the run, useful when the
    runs themselves never stop early), else config.convergence_tol.
    """
    if n_trials < 1:
        raise ValidationError(f"n_trials must be >= 1, got {n_trials}")
    tol = config.convergence_tol if success_tol is None else success_tol
    trials = []
    successes = 0
    iters = []
    violations = 0
    best_costs = []
    for k in range(n_trials):
        seed = config.seed + k
        cfg = config.replace(seed=seed)
        best, stats = optimizer(objective, bounds, cfg)
        succeeded = best.cost <= tol
        successes += int(succeeded)
        iters.append(iterations_to_tolerance(
            stats.best_cost_history, tol, cfg.max_iterations))
        violations += stats.constraint_violations
        best_costs.append(best.cost)
        record = {"trial": k, "seed": seed}
        record.update(stats.to_dict())
        record["success"] = succeeded
        trials.append(record)
    return TrialAggregate(
        success_rate=successes / n_trials,
        mean_iterations=float(np.mean(iters)),
        total_violations=violations,
        best_costs=best_costs,
        trials=trials,
    )
