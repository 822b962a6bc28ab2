"""Analytic benchmark objectives for head-to-head optimizer comparisons."""

from __future__ import annotations

import numpy as np

from .swarm import Bounds


def sphere(x: np.ndarray) -> float:
    """Sum of squares; global minimum 0 at the origin. Unimodal."""
    x = np.asarray(x)
    return float(np.dot(x, x))


def rastrigin(x: np.ndarray) -> float:
    """10*d + sum(x^2 - 10*cos(2*pi*x)); global minimum 0 at the origin,
    with a dense lattice of local minima."""
    x = np.asarray(x)
    return float(10.0 * len(x) + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def sphere_bounds(dim: int = 4) -> Bounds:
    return Bounds(np.full(dim, -5.0), np.full(dim, 5.0))


def rastrigin_bounds(dim: int = 4) -> Bounds:
    return Bounds(np.full(dim, -5.12), np.full(dim, 5.12))


def analytic_suite(dim: int = 4) -> dict:
    """name -> (objective, bounds, convergence_tol) for the analytic half of
    the benchmark suite; the converter-identification benchmark is built
    separately because it needs a simulated plant."""
    return {
        "sphere": (sphere, sphere_bounds(dim), 1e-4),
        "rastrigin": (rastrigin, rastrigin_bounds(dim), 1e-4),
    }
