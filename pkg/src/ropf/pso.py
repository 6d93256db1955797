"""Global-best particle swarm optimizer with a linear inertia schedule.

Velocity update per particle:

    v <- w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)

with r1, r2 fresh uniform draws per dimension, velocities clamped to a
fraction of each dimension's range, and positions clamped to the bounds
(absorbing walls). Every particle owns a counter-based random stream spawned
from the master seed, so results are identical no matter how fitness
evaluations are scheduled; fitness functions must be pure. Personal and
global bests only move on strict improvement, and the global reduction
scans particles in index order, which keeps ties deterministic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Particle",
    "PsoParams",
    "PsoResult",
    "Swarm",
    "clamp_velocity",
    "inertia_weight",
    "initialize_swarm",
    "optimize",
    "step",
    "update_velocity",
]

logger = logging.getLogger(__name__)

FitnessFn = Callable[[np.ndarray], float]
Bounds = Sequence[tuple[float, float]]


@dataclass(frozen=True)
class PsoParams:
    """Swarm configuration. Defaults suit low-dimensional dispatch boxes."""

    swarm_size: int = 30
    max_iterations: int = 300
    w_start: float = 1.2
    w_end: float = 0.9
    c1: float = 2.0
    c2: float = 2.0
    v_max_fraction: float = 0.5
    seed: int = 1

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError(f"swarm_size must be >= 1, got {self.swarm_size}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        for name in ("w_start", "w_end"):
            w = getattr(self, name)
            if not 0.0 <= w <= 2.0:
                raise ValueError(f"{name} must be in [0, 2], got {w}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("acceleration coefficients must be nonnegative")
        if not 0.0 < self.v_max_fraction <= 1.0:
            raise ValueError(f"v_max_fraction must be in (0, 1], got {self.v_max_fraction}")


@dataclass(eq=False)
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float
    fitness: float
    rng: np.random.Generator = field(repr=False)


@dataclass(eq=False)
class Swarm:
    particles: list[Particle]
    gbest_position: np.ndarray
    gbest_fitness: float
    iteration: int
    params: PsoParams


class PsoResult(NamedTuple):
    position: np.ndarray
    fitness: float
    history: tuple[float, ...]


def _particle_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one particle, reproducible from the master seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _check_bounds(bounds: Bounds) -> tuple[np.ndarray, np.ndarray]:
    if len(bounds) == 0:
        raise ValueError("bounds must cover at least one dimension")
    lower = np.array([b[0] for b in bounds], dtype=float)
    upper = np.array([b[1] for b in bounds], dtype=float)
    if np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)):
        raise ValueError("bounds must be finite")
    if np.any(lower >= upper):
        bad = int(np.flatnonzero(lower >= upper)[0])
        raise ValueError(f"degenerate bounds in dimension {bad}: [{lower[bad]}, {upper[bad]}]")
    return lower, upper


def _evaluate(fitness: FitnessFn, position: np.ndarray) -> float:
    value = float(fitness(position))
    return math.inf if math.isnan(value) else value


def inertia_weight(params: PsoParams, iteration: int) -> float:
    """Linear schedule from w_start (first update) to w_end (last update)."""
    if params.max_iterations == 1:
        return params.w_start
    frac = iteration / (params.max_iterations - 1)
    return params.w_start + (params.w_end - params.w_start) * frac


def update_velocity(
    particle: Particle,
    gbest_position: np.ndarray,
    w: float,
    params: PsoParams,
    rand1: float | np.ndarray,
    rand2: float | np.ndarray,
) -> np.ndarray:
    """Inertia plus cognitive and social pulls; no clamping here."""
    return (
        w * particle.velocity
        + params.c1 * rand1 * (particle.pbest_position - particle.position)
        + params.c2 * rand2 * (gbest_position - particle.position)
    )


def clamp_velocity(velocity: np.ndarray, v_max: np.ndarray) -> np.ndarray:
    return np.clip(velocity, -v_max, v_max)


def initialize_swarm(bounds: Bounds, params: PsoParams, fitness: FitnessFn) -> Swarm:
    """Uniform random positions in the box, velocities within the clamp.

    The same seed rebuilds a bit-identical swarm. If every initial fitness
    is non-finite the swarm still starts (penalty-shaped objectives often
    look like that early on); it is logged, not fatal.
    """
    lower, upper = _check_bounds(bounds)
    v_max = params.v_max_fraction * (upper - lower)
    particles: list[Particle] = []
    gbest_position: np.ndarray | None = None
    gbest_fitness = math.inf
    for i in range(params.swarm_size):
        rng = _particle_rng(params.seed, i)
        position = lower + rng.uniform(size=lower.size) * (upper - lower)
        velocity = -v_max + rng.uniform(size=lower.size) * (2.0 * v_max)
        value = _evaluate(fitness, position)
        particles.append(
            Particle(
                position=position,
                velocity=velocity,
                pbest_position=position.copy(),
                pbest_fitness=value,
                fitness=value,
                rng=rng,
            )
        )
        if value < gbest_fitness:
            gbest_fitness = value
            gbest_position = position.copy()
    if gbest_position is None:
        logger.warning("all %d initial fitness values are non-finite", params.swarm_size)
        gbest_position = particles[0].position.copy()
    return Swarm(
        particles=particles,
        gbest_position=gbest_position,
        gbest_fitness=gbest_fitness,
        iteration=0,
        params=params,
    )


def step(swarm: Swarm, fitness: FitnessFn, bounds: Bounds) -> Swarm:
    """Advance the swarm one iteration in place and return it."""
    lower, upper = _check_bounds(bounds)
    params = swarm.params
    v_max = params.v_max_fraction * (upper - lower)
    w = inertia_weight(params, swarm.iteration)
    gbest_position = swarm.gbest_position
    for particle in swarm.particles:
        rand1 = particle.rng.uniform(size=lower.size)
        rand2 = particle.rng.uniform(size=lower.size)
        velocity = clamp_velocity(
            update_velocity(particle, gbest_position, w, params, rand1, rand2), v_max
        )
        particle.velocity = velocity
        particle.position = np.clip(particle.position + velocity, lower, upper)
        particle.fitness = _evaluate(fitness, particle.position)
        if particle.fitness < particle.pbest_fitness:
            particle.pbest_fitness = particle.fitness
            particle.pbest_position = particle.position.copy()
    for particle in swarm.particles:
        if particle.pbest_fitness < swarm.gbest_fitness:
            swarm.gbest_fitness = particle.pbest_fitness
            swarm.gbest_position = particle.pbest_position.copy()
    swarm.iteration += 1
    return swarm


def optimize(fitness: FitnessFn, bounds: Bounds, params: PsoParams) -> PsoResult:
    """Run the full schedule; returns the best point, its fitness, and the
    global-best trace (initial value plus one entry per iteration)."""
    swarm = initialize_swarm(bounds, params, fitness)
    history = [swarm.gbest_fitness]
    for _ in range(params.max_iterations):
        step(swarm, fitness, bounds)
        history.append(swarm.gbest_fitness)
    return PsoResult(
        position=swarm.gbest_position.copy(),
        fitness=swarm.gbest_fitness,
        history=tuple(history),
    )
