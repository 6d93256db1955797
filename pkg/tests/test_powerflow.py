"""Newton-Raphson solver against closed forms and finite differences.

The lossless two-bus feeder has an exact solution: with the load bus
drawing active power P over reactance X at zero reactive demand,

    sin(2 * delta) = -2 X P        |V| = cos(delta)

which follows from S = V conj(y (V - V_slack)) with y = 1/(jX). The
Jacobian is checked against central finite differences of the mismatch,
and every loss figure is cross-checked against a per-branch I**2 R sum
computed here from scratch.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import two_bus_case
from ropf.netmodel import Branch, Bus, Load, NetworkCase, build_admittance
from ropf.powerflow import (
    BusRole,
    InjectionSpec,
    SolverOptions,
    compute_mismatch,
    mismatch_jacobian,
    solve_power_flow,
    total_losses,
)

PQ, PV, SLACK = BusRole.PQ, BusRole.PV, BusRole.SLACK


def make_spec(p, q, roles, v_setpoint=None):
    roles = np.asarray(roles, dtype=int)
    if v_setpoint is None:
        v_setpoint = np.ones(roles.shape)
    return InjectionSpec(
        p=np.asarray(p, float),
        q=np.asarray(q, float),
        roles=roles,
        v_setpoint=np.asarray(v_setpoint, float),
    )


def two_bus_solution(p_load, reactance, resistance=0.0, q_load=0.0):
    case = two_bus_case(reactance, resistance, p_load, q_load)
    spec = make_spec([-p_load, 0.0], [-q_load, 0.0], [PQ, SLACK])
    return case, solve_power_flow(case, spec)


def branch_loss_sum(case, solution):
    """Independent I**2 R tally from the branch list and final voltages."""
    volt = solution.v * np.exp(1j * solution.delta)
    total = 0.0
    for br in case.branches:
        vf = volt[case.index_of(br.from_bus)]
        vt = volt[case.index_of(br.to_bus)]
        i_series = (vf / br.tap_ratio - vt) / complex(br.resistance, br.reactance)
        total += br.resistance * abs(i_series) ** 2
    return total


def test_spec_requires_exactly_one_slack():
    with pytest.raises(ValueError, match="slack"):
        make_spec([0.0, 0.0], [0.0, 0.0], [SLACK, SLACK])
    with pytest.raises(ValueError, match="slack"):
        make_spec([0.0, 0.0], [0.0, 0.0], [PQ, PQ])


def test_spec_rejects_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        InjectionSpec(
            p=np.zeros(3), q=np.zeros(2), roles=np.array([PQ, SLACK]), v_setpoint=np.ones(2)
        )


def test_spec_rejects_nonpositive_setpoint():
    with pytest.raises(ValueError, match="setpoint"):
        make_spec([0.0, 0.0], [0.0, 0.0], [PQ, SLACK], v_setpoint=[1.0, 0.0])


def test_mismatch_polar_formula_hand_values():
    # one line, y = -10j: P1 = -10 sin(d1 - d2)... computed from the
    # textbook polar sum, written out here independently
    case = two_bus_case(reactance=0.1)
    ybus = build_admittance(case)
    spec = make_spec([0.0, 0.0], [0.0, 0.0], [PQ, SLACK])
    d1 = 0.1
    dp, dq = compute_mismatch(np.array([1.0, 1.0]), np.array([d1, 0.0]), spec, ybus)
    p1_calc = -10.0 * math.sin(0.0 - d1)
    q1_calc = 10.0 - 10.0 * math.cos(0.0 - d1)
    assert dp[0] == pytest.approx(-p1_calc, abs=1e-12)
    assert dq[0] == pytest.approx(-q1_calc, abs=1e-12)


def test_flat_state_zero_injection_is_exact():
    case = two_bus_case()
    spec = make_spec([0.0, 0.0], [0.0, 0.0], [PQ, SLACK])
    dp, dq = compute_mismatch(np.ones(2), np.zeros(2), spec, build_admittance(case))
    assert np.allclose(dp, 0.0, atol=1e-15)
    assert np.allclose(dq, 0.0, atol=1e-15)


def test_zero_load_converges_without_iterating():
    case, solution = two_bus_solution(p_load=0.0, reactance=0.1)
    assert solution.converged
    assert solution.iterations == 0
    assert np.allclose(solution.v, 1.0)


def test_two_bus_closed_form():
    case, solution = two_bus_solution(p_load=0.5, reactance=0.1)
    delta = 0.5 * math.asin(-2 * 0.1 * 0.5)
    assert solution.converged
    assert solution.delta[0] == pytest.approx(delta, abs=1e-9)
    assert solution.v[0] == pytest.approx(math.cos(delta), abs=1e-9)
    # frozen values of that closed form
    assert solution.delta[0] == pytest.approx(-0.0500837105807799, abs=1e-9)
    assert solution.v[0] == pytest.approx(0.9987460731103327, abs=1e-9)


def test_random_lossless_instances_match_closed_form():
    rng = np.random.default_rng(19)
    for _ in range(25):
        p = float(rng.uniform(0.1, 0.7))
        x = float(rng.uniform(0.05, 0.3))
        case, solution = two_bus_solution(p_load=p, reactance=x)
        assert solution.converged
        delta = 0.5 * math.asin(-2 * x * p)
        assert solution.delta[0] == pytest.approx(delta, abs=1e-6)
        assert solution.v[0] == pytest.approx(math.cos(delta), abs=1e-6)
        assert total_losses(solution, case) == pytest.approx(0.0, abs=1e-8)


def test_resistive_loss_cross_check():
    case, solution = two_bus_solution(p_load=0.3, reactance=0.1, resistance=0.01)
    assert solution.converged
    loss = total_losses(solution, case)
    assert loss > 0
    assert loss == pytest.approx(branch_loss_sum(case, solution), abs=1e-12)
    # conservation: net injections over all buses sum to the loss
    assert float(np.sum(solution.p_injected)) == pytest.approx(loss, abs=1e-10)
    assert solution.total_loss == pytest.approx(loss, abs=1e-12)


def test_slack_absorbs_balance():
    case, solution = two_bus_solution(p_load=0.3, reactance=0.1, resistance=0.01, q_load=0.1)
    slack = 1
    assert solution.p_slack == pytest.approx(solution.p_injected[slack], abs=1e-12)
    assert solution.q_slack == pytest.approx(solution.q_injected[slack], abs=1e-12)
    assert solution.p_slack == pytest.approx(0.3 + solution.total_loss, abs=1e-8)


def test_pv_bus_holds_magnitude():
    case = NetworkCase(
        base_mva=100.0,
        buses=(Bus(1, "generator"), Bus(2, "load"), Bus(3, "slack")),
        branches=(Branch(1, 2, 0.01, 0.05), Branch(2, 3, 0.01, 0.05)),
        loads=(Load(2, 0.4, 0.1),),
    )
    spec = make_spec(
        [0.3, -0.4, 0.0], [0.0, -0.1, 0.0], [PV, PQ, SLACK], v_setpoint=[1.02, 1.0, 1.0]
    )
    solution = solve_power_flow(case, spec)
    assert solution.converged
    assert solution.v[0] == pytest.approx(1.02, abs=1e-12)
    assert solution.p_injected[0] == pytest.approx(0.3, abs=1e-6)
    # reactive output at the PV bus is an outcome, not a specified injection
    assert abs(solution.q_injected[0]) > 0


def test_residual_certificate_at_solution():
    case = two_bus_case(0.1, 0.01, 0.4, 0.05)
    spec = make_spec([-0.4, 0.0], [-0.05, 0.0], [PQ, SLACK])
    solution = solve_power_flow(case, spec)
    assert solution.converged
    dp, dq = compute_mismatch(solution.v, solution.delta, spec, build_admittance(case))
    assert abs(dp[0]) <= 1e-6
    assert abs(dq[0]) <= 1e-6
    assert solution.max_mismatch <= 1e-6


def test_warm_start_skips_iterations():
    case = two_bus_case(0.1, 0.01, 0.4, 0.05)
    spec = make_spec([-0.4, 0.0], [-0.05, 0.0], [PQ, SLACK])
    first = solve_power_flow(case, spec)
    again = solve_power_flow(
        case,
        spec,
        options=SolverOptions(flat_start=False),
        start=(first.v, first.delta),
    )
    assert again.converged
    assert again.iterations == 0


def test_infeasible_load_reports_nonconvergence():
    # far beyond the line's transfer capability; no solution exists
    case, solution = two_bus_solution(p_load=100.0, reactance=0.1)
    assert not solution.converged
    assert np.all(np.isfinite(solution.v))
    assert solution.max_mismatch > 1e-6


def test_max_iterations_zero_reports_nonconvergence():
    case = two_bus_case()
    spec = make_spec([-0.5, 0.0], [0.0, 0.0], [PQ, SLACK])
    solution = solve_power_flow(case, spec, options=SolverOptions(max_iterations=0))
    assert not solution.converged


def random_connected_case(rng, n):
    """Ring of n buses plus a random chord; mixed lines and transformers."""
    buses = tuple(
        Bus(i + 1, "slack" if i == n - 1 else "load") for i in range(n)
    )
    edges = [(i + 1, (i + 1) % n + 1) for i in range(n)]
    if n > 3 and rng.random() < 0.7:
        a, b = rng.choice(n, size=2, replace=False) + 1
        if a != b and (a, b) not in edges and (b, a) not in edges:
            edges.append((int(a), int(b)))
    branches = []
    for f, t in edges:
        r = float(rng.uniform(0.01, 0.08))
        x = float(rng.uniform(0.05, 0.3))
        if rng.random() < 0.3:
            branches.append(Branch(f, t, r, x, tap_ratio=float(rng.uniform(0.9, 1.05))))
        else:
            branches.append(Branch(f, t, r, x, charging_susceptance=float(rng.uniform(0.0, 0.1))))
    return NetworkCase(base_mva=100.0, buses=buses, branches=tuple(branches))


def jacobian_fd_gap(case, rng):
    """Max |analytic - central difference| over a random interior state."""
    n = case.n
    ybus = build_admittance(case)
    roles = np.full(n, int(PQ))
    roles[n - 1] = int(SLACK)
    if n >= 4:
        roles[0] = int(PV)
    spec = make_spec(np.zeros(n), np.zeros(n), roles, v_setpoint=np.ones(n))
    pv = np.flatnonzero(roles == PV)
    pq = np.flatnonzero(roles == PQ)
    pvpq = np.concatenate([pv, pq])

    v = rng.uniform(0.95, 1.05, size=n)
    delta = rng.uniform(-0.3, 0.3, size=n)
    delta[n - 1] = 0.0

    def residual(x):
        d2 = delta.copy()
        v2 = v.copy()
        d2[pvpq] = x[: pvpq.size]
        v2[pq] = x[pvpq.size :]
        dp, dq = compute_mismatch(v2, d2, spec, ybus)
        return np.concatenate([dp[pvpq], dq[pq]])

    x0 = np.concatenate([delta[pvpq], v[pq]])
    jac = mismatch_jacobian(v, delta, ybus, pvpq, pq)
    h = 1e-6
    fd = np.empty_like(jac)
    for j in range(x0.size):
        step = np.zeros_like(x0)
        step[j] = h
        # residual = spec - computed, so its derivative is -J
        fd[:, j] = (residual(x0 - step) - residual(x0 + step)) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(jac))))
    return float(np.max(np.abs(jac - fd))) / scale


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    for k in range(20):
        case = random_connected_case(rng, int(rng.integers(3, 7)))
        assert jacobian_fd_gap(case, rng) <= 1e-5


def test_fixture_flow_with_held_generator_voltages(fixture_case):
    # generators as PV at 1.0, compensators idle, loads as drawn
    case = fixture_case
    n = case.n
    p = np.zeros(n)
    q = np.zeros(n)
    roles = np.full(n, int(PQ))
    for load in case.loads:
        k = case.index_of(load.bus)
        p[k] -= load.p
        q[k] -= load.q
    for gen in case.generators:
        k = case.index_of(gen.bus)
        p[k] += gen.p_output
        roles[k] = int(PV)
    roles[case.index_of(case.slack_bus().id)] = int(SLACK)
    spec = make_spec(p, q, roles, v_setpoint=np.ones(n))
    solution = solve_power_flow(case, spec)
    assert solution.converged
    loss = total_losses(solution, case)
    assert loss == pytest.approx(branch_loss_sum(case, solution), abs=1e-10)
    assert float(np.sum(solution.p_injected)) == pytest.approx(loss, abs=1e-7)
