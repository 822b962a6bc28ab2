"""Global-best Particle Swarm Optimization baseline.

Standard inertia-weight PSO: each particle keeps a velocity updated toward
its personal best and the swarm's global best,

    v <- w*v + c1*r1.(pbest - x) + c2*r2.(gbest - x)
    x <- x + v

with r1, r2 ~ U[0,1] per dimension. Defaults w = 0.729, c1 = c2 = 1.49445
(constriction-equivalent). Velocities are limited to the box span; positions
are clamped into the bounds and each clamped proposal counts one constraint
violation, mirroring the other optimizer's accounting so violation totals
are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .swarm import Bounds, Candidate, StopWatch, TrialStats, evaluate_objective


@dataclass(frozen=True)
class PsoConfig:
    population: int = 40
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    max_iterations: int = 200
    convergence_tol: float = 1e-4
    seed: int = 0

    def validate(self):
        if self.population < 2:
            raise ValidationError(f"population must be >= 2, got {self.population}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.inertia < 0 or self.cognitive < 0 or self.social < 0:
            raise ValidationError("inertia and acceleration coefficients must be >= 0")

    def replace(self, **changes) -> "PsoConfig":
        return replace(self, **changes)


def pso_optimize(objective, bounds: Bounds, config: PsoConfig | None = None
                 ) -> tuple[Candidate, TrialStats]:
    """Minimize objective over the box with global-best PSO.

    Same statistics contract as the spider-monkey optimizer: non-increasing
    best-cost history, one violation per clamped proposal, deterministic
    under seed, NaN objectives raise, +inf marks an infeasible candidate.
    """
    if config is None:
        config = PsoConfig()
    config.validate()
    stats = TrialStats()
    rng = np.random.default_rng(config.seed)
    n, dim = config.population, bounds.dim

    with StopWatch() as watch:
        positions = bounds.sample(rng, n)
        velocities = np.zeros((n, dim))
        costs = np.array([evaluate_objective(objective, p) for p in positions])
        pbest_pos = positions.copy()
        pbest_cost = costs.copy()
        g = int(np.argmin(costs))
        gbest = Candidate(positions[g].copy(), float(costs[g]))
        v_max = np.where(bounds.span > 0, bounds.span, 1.0)

        for _ in range(config.max_iterations):
            r1 = rng.uniform(size=(n, dim))
            r2 = rng.uniform(size=(n, dim))
            velocities = (config.inertia * velocities
                          + config.cognitive * r1 * (pbest_pos - positions)
                          + config.social * r2 * (gbest.position - positions))
            np.clip(velocities, -v_max, v_max, out=velocities)
            raw = positions + velocities
            positions = np.clip(raw, bounds.lower, bounds.upper)
            stats.constraint_violations += int(np.sum(np.any(positions != raw, axis=1)))
            costs = np.array([evaluate_objective(objective, p) for p in positions])

            improved = costs < pbest_cost
            pbest_pos[improved] = positions[improved]
            pbest_cost[improved] = costs[improved]
            g = int(np.argmin(pbest_cost))
            if pbest_cost[g] < gbest.cost:
                gbest = Candidate(pbest_pos[g].copy(), float(pbest_cost[g]))

            stats.best_cost_history.append(gbest.cost)
            stats.iterations_used += 1
            if gbest.cost <= config.convergence_tol:
                break

    stats.success = gbest.cost <= config.convergence_tol
    stats.wall_time = watch.elapsed
    return gbest, stats
