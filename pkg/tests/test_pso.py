"""Particle swarm optimizer: update arithmetic, invariants, benchmarks.

The velocity rule is checked with hand arithmetic; swarm-level behavior is
checked as invariants (bounds containment, velocity clamp, non-increasing
global best, bit-identical reruns). Benchmark thresholds use the tail end
of the inertia range (0.9 -> 0.4), which contracts reliably on smooth
functions; the shipped defaults are exercised in the acceptance suite.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from ropf.pso import (
    Particle,
    PsoParams,
    Swarm,
    clamp_velocity,
    inertia_weight,
    initialize_swarm,
    optimize,
    step,
    update_velocity,
)

CONTRACTING = dict(w_start=0.9, w_end=0.4)


def sphere(x):
    return float(np.sum(x * x))


def rosenbrock(x):
    return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)


def test_params_validate():
    for bad in (
        dict(swarm_size=0),
        dict(max_iterations=0),
        dict(w_start=-0.1),
        dict(w_end=2.5),
        dict(c1=-1.0),
        dict(v_max_fraction=0.0),
        dict(v_max_fraction=1.5),
    ):
        with pytest.raises(ValueError):
            PsoParams(**bad)


def test_inertia_schedule_endpoints_and_midpoint():
    params = PsoParams(max_iterations=11, w_start=1.0, w_end=0.5)
    assert inertia_weight(params, 0) == pytest.approx(1.0, abs=1e-12)
    assert inertia_weight(params, 10) == pytest.approx(0.5, abs=1e-12)
    assert inertia_weight(params, 5) == pytest.approx(0.75, abs=1e-12)
    one_shot = PsoParams(max_iterations=1, w_start=1.2, w_end=0.9)
    assert inertia_weight(one_shot, 0) == 1.2


def test_velocity_update_hand_arithmetic():
    particle = Particle(
        position=np.array([1.0, 2.0]),
        velocity=np.array([0.5, -0.5]),
        pbest_position=np.array([0.0, 0.0]),
        pbest_fitness=0.0,
        fitness=1.0,
        rng=np.random.default_rng(0),
    )
    params = PsoParams(c1=2.0, c2=2.0)
    v = update_velocity(particle, np.array([2.0, 2.0]), 0.5, params, 0.25, 0.5)
    # 0.5*[0.5,-0.5] + 2*0.25*([0,0]-[1,2]) + 2*0.5*([2,2]-[1,2])
    assert np.allclose(v, [0.75, -1.25], atol=1e-15)


def test_velocity_update_per_dimension_draws():
    particle = Particle(
        position=np.zeros(2),
        velocity=np.zeros(2),
        pbest_position=np.array([1.0, 1.0]),
        pbest_fitness=0.0,
        fitness=1.0,
        rng=np.random.default_rng(0),
    )
    params = PsoParams(c1=1.0, c2=0.0)
    v = update_velocity(
        particle, np.zeros(2), 0.0, params, np.array([0.25, 0.75]), np.zeros(2)
    )
    assert np.allclose(v, [0.25, 0.75], atol=1e-15)


def test_clamp_velocity():
    clamped = clamp_velocity(np.array([3.0, -4.0, 0.1]), np.array([1.0, 2.0, 5.0]))
    assert np.allclose(clamped, [1.0, -2.0, 0.1])


def test_bounds_rejected_when_degenerate():
    with pytest.raises(ValueError, match="degenerate bounds in dimension 1"):
        optimize(sphere, [(-1.0, 1.0), (0.5, 0.5)], PsoParams(max_iterations=2))
    with pytest.raises(ValueError, match="at least one dimension"):
        optimize(sphere, [], PsoParams(max_iterations=2))
    with pytest.raises(ValueError, match="finite"):
        optimize(sphere, [(0.0, math.inf)], PsoParams(max_iterations=2))


def test_initial_gbest_is_min_over_particles():
    params = PsoParams(swarm_size=12, max_iterations=5, seed=7)
    swarm = initialize_swarm([(-3.0, 3.0)] * 2, params, sphere)
    best = min(p.pbest_fitness for p in swarm.particles)
    assert swarm.gbest_fitness == best


def test_positions_and_velocities_respect_limits_every_iteration():
    bounds = [(-2.0, 1.0), (0.0, 4.0)]
    params = PsoParams(swarm_size=8, max_iterations=40, seed=3)
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])
    v_max = params.v_max_fraction * (upper - lower)
    swarm = initialize_swarm(bounds, params, sphere)
    for _ in range(params.max_iterations):
        step(swarm, sphere, bounds)
        for particle in swarm.particles:
            assert np.all(particle.position >= lower - 1e-12)
            assert np.all(particle.position <= upper + 1e-12)
            assert np.all(np.abs(particle.velocity) <= v_max + 1e-12)


def test_gbest_history_non_increasing():
    result = optimize(sphere, [(-5.0, 5.0)] * 3, PsoParams(swarm_size=10, max_iterations=60, seed=5))
    assert all(b <= a + 1e-15 for a, b in zip(result.history, result.history[1:]))


def test_history_length_and_final_value():
    params = PsoParams(swarm_size=6, max_iterations=25, seed=2)
    result = optimize(sphere, [(-1.0, 1.0)] * 2, params)
    assert len(result.history) == params.max_iterations + 1
    assert result.history[-1] == result.fitness
    assert sphere(result.position) == pytest.approx(result.fitness, rel=1e-12)


def test_same_seed_reproduces_bitwise():
    params = PsoParams(swarm_size=9, max_iterations=30, seed=11)
    a = optimize(sphere, [(-5.0, 5.0)] * 3, params)
    b = optimize(sphere, [(-5.0, 5.0)] * 3, params)
    assert a.history == b.history
    assert np.array_equal(a.position, b.position)


def test_different_seeds_explore_differently():
    bounds = [(-5.0, 5.0)] * 3
    a = optimize(sphere, bounds, PsoParams(swarm_size=9, max_iterations=30, seed=1))
    b = optimize(sphere, bounds, PsoParams(swarm_size=9, max_iterations=30, seed=2))
    assert a.history != b.history


def test_nan_fitness_treated_as_worst():
    def half_nan(x):
        return float("nan") if x[0] < 0 else sphere(x)

    result = optimize(
        half_nan, [(-5.0, 5.0)] * 2, PsoParams(swarm_size=10, max_iterations=40, seed=4)
    )
    assert math.isfinite(result.fitness)
    assert result.position[0] >= 0


def test_all_nan_fitness_survives():
    result = optimize(
        lambda x: float("nan"), [(-1.0, 1.0)], PsoParams(swarm_size=4, max_iterations=3, seed=1)
    )
    assert math.isinf(result.fitness)
    assert len(result.history) == 4


def test_sphere_benchmark():
    params = PsoParams(swarm_size=20, max_iterations=200, seed=1, **CONTRACTING)
    result = optimize(sphere, [(-5.0, 5.0)] * 3, params)
    assert result.fitness < 1e-8
    assert np.all(np.abs(result.position) < 1e-3)


def test_shifted_quadratic_benchmark():
    params = PsoParams(swarm_size=10, max_iterations=100, seed=1, **CONTRACTING)
    result = optimize(lambda x: (x[0] - 0.3) ** 2, [(0.0, 1.0)], params)
    assert abs(result.position[0] - 0.3) < 1e-6


def test_rosenbrock_benchmark():
    params = PsoParams(swarm_size=30, max_iterations=500, seed=2, **CONTRACTING)
    result = optimize(rosenbrock, [(-2.0, 2.0), (-1.0, 3.0)], params)
    assert result.fitness < 1e-6
    assert np.allclose(result.position, [1.0, 1.0], atol=1e-3)


def test_optimum_on_boundary_is_reachable():
    params = PsoParams(swarm_size=15, max_iterations=120, seed=6, **CONTRACTING)
    result = optimize(lambda x: -float(x[0]), [(0.0, 2.0)], params)
    assert result.position[0] == pytest.approx(2.0, abs=1e-9)
