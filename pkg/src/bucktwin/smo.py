"""Spider Monkey Optimization for bound-constrained minimization.

Fission-fusion swarm search: the population forages in groups, each led by
its local leader, with a global leader over the whole swarm. Six phases run
per iteration:

1. Local leader phase — every member proposes
       x*[d] = x[d] + r1[d]*(LL[d] - x[d]) + r2[d]*p_r*(x_rand[d] - x[d])
   with r1, r2 ~ U[0,1] drawn fresh per dimension, p_r the perturbation
   factor drawn uniformly from the configured range per proposal, and
   x_rand a random member of the same group. Each dimension is perturbed
   with probability 1 - p_r (at least one always is); unperturbed
   dimensions keep their old value, which preserves swarm diversity and
   lets good coordinates survive. Proposals are accepted greedily on
   fitness.
2. Global leader phase — members are picked with fitness-proportional
   probability 0.9*fit/max_fit + 0.1 and move one random dimension toward
   the global leader with a U(-1,1) kick from a random group member.
3. Global leader learning — the global leader updates only on improvement;
   its stagnation counter increments otherwise. The counter treats an
   improvement smaller than improvement_rel_tol (relative) as stagnation,
   so micro-creep cannot mask a trapped swarm; the leader record itself
   updates on any strict improvement regardless.
4. Local leader learning — same per group.
5. Local leader decision — a group stagnant past local_leader_limit is
   shaken up: each member either reinitializes uniformly or is redirected
   by the global leader (coin flip per member), replacing unconditionally.
6. Global leader decision — stagnation past global_leader_limit splits the
   swarm into one more group (fission) until max_groups, then fuses all
   groups back into one.

Every proposal is clamped into the bounds; a proposal with any component
outside counts one constraint violation. The run stops when the best cost
reaches convergence_tol or the iteration budget is spent. Deterministic
under seed; within each phase the random draws for a member do not depend
on other members' objective values, so evaluations inside a phase could be
parallelized without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .swarm import (
    Bounds,
    Candidate,
    StopWatch,
    TrialStats,
    evaluate_objective,
    fitness_from_cost,
)


@dataclass(frozen=True)
class SmoConfig:
    population: int = 40
    max_groups: int | None = None          # default max(1, population // 10)
    perturbation_range: tuple[float, float] = (0.1, 0.9)
    local_leader_limit: int | None = None  # default dimension * population
    global_leader_limit: int | None = None  # default population
    max_iterations: int = 200
    convergence_tol: float = 1e-4
    improvement_rel_tol: float = 0.0  # relative cost drop that resets stagnation counters
    seed: int = 0

    def validate(self, dim: int):
        if self.population < 4:
            raise ValidationError(f"population must be >= 4, got {self.population}")
        mg = self.resolved_max_groups()
        if not 1 <= mg <= self.population // 4:
            raise ValidationError(
                f"max_groups must lie in [1, population/4], got {mg} "
                f"for population {self.population}"
            )
        lo, hi = self.perturbation_range
        if not (0.1 <= lo <= hi <= 0.9):
            raise ValidationError(
                f"perturbation_range must be within [0.1, 0.9], got {self.perturbation_range}"
            )
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0.0 <= self.improvement_rel_tol < 1.0:
            raise ValidationError("improvement_rel_tol must lie in [0, 1)")

    def resolved_max_groups(self) -> int:
        if self.max_groups is not None:
            return self.max_groups
        return max(1, self.population // 10)

    def resolved_local_limit(self, dim: int) -> int:
        if self.local_leader_limit is not None:
            return self.local_leader_limit
        return dim * self.population

    def resolved_global_limit(self) -> int:
        if self.global_leader_limit is not None:
            return self.global_leader_limit
        return self.population

    def replace(self, **changes) -> "SmoConfig":
        return replace(self, **changes)


def _partition(n_members: int, n_groups: int) -> list[np.ndarray]:
    """Split member indices 0..n-1 into n_groups contiguous chunks with
    sizes as equal as possible."""
    edges = np.linspace(0, n_members, n_groups + 1).round().astype(int)
    return [np.arange(edges[g], edges[g + 1]) for g in range(n_groups)]


class _Swarm:
    """Mutable optimizer state: positions, costs, leaders, counters."""

    def __init__(self, objective, bounds: Bounds, config: SmoConfig,
                 rng: np.random.Generator, stats: TrialStats):
        self.objective = objective
        self.bounds = bounds
        self.config = config
        self.rng = rng
        self.stats = stats
        n = config.population
        self.positions = bounds.sample(rng, n)
        self.costs = np.array([evaluate_objective(objective, p) for p in self.positions])
        self.n_groups = 1
        self.groups = _partition(n, 1)
        best = int(np.argmin(self.costs))
        self.global_leader = Candidate(self.positions[best].copy(), float(self.costs[best]))
        self.global_count = 0
        self._reset_local_leaders()

    def _reset_local_leaders(self):
        self.local_leaders = []
        self.local_counts = []
        for members in self.groups:
            k = members[int(np.argmin(self.costs[members]))]
            self.local_leaders.append(Candidate(self.positions[k].copy(), float(self.costs[k])))
            self.local_counts.append(0)

    def _propose(self, i: int, proposal: np.ndarray, greedy: bool = True):
        """Clamp, count violation, evaluate, and (maybe greedily) accept.

        Greedy acceptance compares costs directly: the cost-to-fitness map
        is strictly monotone, so the ordering is identical, but raw costs
        keep full float resolution where fitness saturates near 1.
        """
        clamped, violated = self.bounds.clamp(proposal)
        if violated:
            self.stats.constraint_violations += 1
        cost = evaluate_objective(self.objective, clamped)
        if not greedy or cost < self.costs[i]:
            self.positions[i] = clamped
            self.costs[i] = cost

    def local_leader_phase(self):
        dim = self.bounds.dim
        p_lo, p_hi = self.config.perturbation_range
        for g, members in enumerate(self.groups):
            ll = self.local_leaders[g].position
            # pre-assign this phase's draws for the whole group
            r1 = self.rng.uniform(0.0, 1.0, size=(len(members), dim))
            r2 = self.rng.uniform(0.0, 1.0, size=(len(members), dim))
            p_r = self.rng.uniform(p_lo, p_hi, size=len(members))
            partners = self.rng.integers(0, len(members), size=len(members))
            gates = self.rng.uniform(size=(len(members), dim))
            forced = self.rng.integers(0, dim, size=len(members))
            for j, i in enumerate(members):
                x = self.positions[i]
                x_rand = self.positions[members[partners[j]]]
                perturb = gates[j] >= p_r[j]
                if not perturb.any():
                    perturb[forced[j]] = True
                proposal = x.copy()
                moved = x + r1[j] * (ll - x) + r2[j] * p_r[j] * (x_rand - x)
                proposal[perturb] = moved[perturb]
                self._propose(i, proposal)

    def global_leader_phase(self):
        gl = self.global_leader.position
        for members in self.groups:
            size = len(members)
            fits = np.array([fitness_from_cost(c) for c in self.costs[members]])
            max_fit = fits.max()
            probs = 0.9 * fits / max_fit + 0.1 if max_fit > 0 else np.full(size, 0.1)
            count = 0
            passes = 0
            while count < size and passes < 50:
                passes += 1
                for j, i in enumerate(members):
                    if count >= size:
                        break
                    if self.rng.uniform() >= probs[j]:
                        continue
                    count += 1
                    x = self.positions[i]
                    d = int(self.rng.integers(0, self.bounds.dim))
                    partner = self.positions[members[int(self.rng.integers(0, size))]]
                    proposal = x.copy()
                    proposal[d] = (x[d]
                                   + self.rng.uniform() * (gl[d] - x[d])
                                   + self.rng.uniform(-1.0, 1.0) * (partner[d] - x[d]))
                    self._propose(i, proposal)

    def _meaningful_improvement(self, new_cost: float, old_cost: float) -> bool:
        """Stagnation-counter test: the drop must beat the configured
        relative tolerance (0 means any strict improvement counts)."""
        tol = self.config.improvement_rel_tol
        return new_cost < old_cost - tol * abs(old_cost)

    def global_leader_learning(self):
        best = int(np.argmin(self.costs))
        meaningful = self._meaningful_improvement(self.costs[best], self.global_leader.cost)
        if self.costs[best] < self.global_leader.cost:
            self.global_leader = Candidate(self.positions[best].copy(), float(self.costs[best]))
        if meaningful:
            self.global_count = 0
        else:
            self.global_count += 1

    def local_leader_learning(self):
        for g, members in enumerate(self.groups):
            k = members[int(np.argmin(self.costs[members]))]
            meaningful = self._meaningful_improvement(
                self.costs[k], self.local_leaders[g].cost)
            if self.costs[k] < self.local_leaders[g].cost:
                self.local_leaders[g] = Candidate(self.positions[k].copy(), float(self.costs[k]))
            if meaningful:
                self.local_counts[g] = 0
            else:
                self.local_counts[g] += 1

    def local_leader_decision(self, local_limit: int):
        gl = self.global_leader.position
        for g, members in enumerate(self.groups):
            if self.local_counts[g] <= local_limit:
                continue
            self.local_counts[g] = 0
            ll = self.local_leaders[g].position
            coins = self.rng.uniform(size=len(members))
            for j, i in enumerate(members):
                if coins[j] < 0.5:
                    proposal = self.bounds.sample(self.rng)[0]
                else:
                    x = self.positions[i]
                    r_a = self.rng.uniform(size=self.bounds.dim)
                    r_b = self.rng.uniform(size=self.bounds.dim)
                    proposal = x + r_a * (gl - x) + r_b * (x - ll)
                self._propose(i, proposal, greedy=False)

    def global_leader_decision(self):
        if self.global_count <= self.config.resolved_global_limit():
            return
        self.global_count = 0
        if self.n_groups < self.config.resolved_max_groups():
            self.n_groups += 1  # fission: one more group
        else:
            self.n_groups = 1  # fusion: back to a single troop
        self.groups = _partition(self.config.population, self.n_groups)
        self._reset_local_leaders()


def smo_optimize(objective, bounds: Bounds, config: SmoConfig | None = None
                 ) -> tuple[Candidate, TrialStats]:
    """Minimize objective over the box with Spider Monkey Optimization.

    Returns the best candidate ever seen and the run statistics. The
    best-cost history is non-increasing by construction (the global leader
    only ever improves). Raises ObjectiveError if the objective yields NaN;
    +inf returns are treated as infeasible-but-legal.
    """
    if config is None:
        config = SmoConfig()
    config.validate(bounds.dim)
    stats = TrialStats()
    rng = np.random.default_rng(config.seed)
    with StopWatch() as watch:
        swarm = _Swarm(objective, bounds, config, rng, stats)
        local_limit = config.resolved_local_limit(bounds.dim)
        for _ in range(config.max_iterations):
            swarm.local_leader_phase()
            swarm.global_leader_phase()
            swarm.global_leader_learning()
            swarm.local_leader_learning()
            swarm.local_leader_decision(local_limit)
            swarm.global_leader_decision()
            stats.best_cost_history.append(swarm.global_leader.cost)
            stats.iterations_used += 1
            if swarm.global_leader.cost <= config.convergence_tol:
                break
    stats.success = swarm.global_leader.cost <= config.convergence_tol
    stats.wall_time = watch.elapsed
    return swarm.global_leader, stats
