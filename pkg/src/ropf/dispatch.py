"""Reactive dispatch and pricing.

Builds the optimization problem (decision vector of reactive outputs, box
limits from the sources, penalty-shaped fitness over the AC power flow),
runs the swarm, and settles payments. The decision vector orders the
non-slack generators first, then the compensators, both in case order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import pso
from .costmodel import dispatchable_generators, total_reactive_cost
from .netmodel import AdmittanceMatrix, NetworkCase, build_admittance
from .powerflow import (
    BusRole,
    InjectionSpec,
    PowerFlowSolution,
    SolverOptions,
    solve_power_flow,
)
from .pso import PsoParams

__all__ = [
    "DecisionVector",
    "DispatchError",
    "Payments",
    "PenaltyConfig",
    "RopfReport",
    "allocate_payments",
    "baseline_loss",
    "build_injections",
    "decision_bounds",
    "duty_cost",
    "evaluate_fitness",
    "report_to_dict",
    "render_text",
    "run_pricing",
    "run_ropf",
    "unity_power_factor_case",
    "voltage_penalty",
]

logger = logging.getLogger(__name__)


class DispatchError(RuntimeError):
    """A dispatch step failed in a way the optimizer cannot absorb."""


@dataclass(frozen=True)
class DecisionVector:
    """Reactive outputs under optimization, per-unit."""

    q_generators: tuple[float, ...]
    q_compensators: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.q_generators + self.q_compensators, dtype=float)

    @classmethod
    def from_array(cls, case: NetworkCase, values: np.ndarray) -> "DecisionVector":
        n_gen = len(dispatchable_generators(case))
        values = np.asarray(values, dtype=float)
        if values.size != n_gen + len(case.compensators):
            raise ValueError(
                f"expected {n_gen + len(case.compensators)} decision values, got {values.size}"
            )
        return cls(
            q_generators=tuple(float(x) for x in values[:n_gen]),
            q_compensators=tuple(float(x) for x in values[n_gen:]),
        )


@dataclass(frozen=True)
class PenaltyConfig:
    """Exterior penalty shaping for the fitness function.

    voltage_weight scales the quadratic band-violation terms; the
    nonconvergence penalty is a constant large enough to dominate any
    plausible feasible cost.
    """

    voltage_weight: float = 1e4
    nonconvergence_penalty: float = 1e6


@dataclass(frozen=True)
class Payments:
    """Settled $/h amounts. duty_shares are the parts of the duty cost
    charged back to each generator before the payment floor."""

    generator_payments: tuple[float, ...]
    compensator_payments: tuple[float, ...]
    duty_shares: tuple[float, ...]
    load_allocated: float
    total: float


@dataclass(frozen=True)
class RopfReport:
    """Outcome of one dispatch run, source-aligned tuples throughout."""

    source_kinds: tuple[str, ...]
    source_buses: tuple[int, ...]
    var_requirements: tuple[float, ...]
    cost_per_source: tuple[float, ...]
    total_payment: float
    loss_before: float
    loss_after: float
    loss_before_alt: float | None
    feasible: bool
    converged: bool
    gbest_fitness: float
    convergence_history: tuple[float, ...]
    seed: int
    params: PsoParams
    penalties: PenaltyConfig
    bus_ids: tuple[int, ...]
    bus_voltages: tuple[float, ...]
    bus_angles: tuple[float, ...]
    duty_cost: float | None = None
    load_allocated_cost: float | None = None


def decision_bounds(case: NetworkCase) -> list[tuple[float, float]]:
    """Box limits for the decision vector, source order."""
    gens = dispatchable_generators(case)
    return [(g.q_min, g.q_max) for g in gens] + [(c.q_min, c.q_max) for c in case.compensators]


def build_injections(
    case: NetworkCase,
    decision: DecisionVector | None = None,
    generators_pv: bool = False,
) -> InjectionSpec:
    """Injection specification for a dispatch state.

    Loads draw power; non-slack generators add their scheduled active
    output. With generators_pv the generator buses are voltage-held at
    1.0 p.u. (reference flow); otherwise generators and compensators inject
    the reactive outputs of the decision (zero when absent). Sources at the
    slack bus are left to the slack balance.
    """
    n = case.n
    p = np.zeros(n)
    q = np.zeros(n)
    roles = np.full(n, int(BusRole.PQ))
    v_set = np.ones(n)
    slack_idx = case.index_of(case.slack_bus().id)
    roles[slack_idx] = int(BusRole.SLACK)

    for load in case.loads:
        k = case.index_of(load.bus)
        p[k] -= load.p
        q[k] -= load.q

    gens = dispatchable_generators(case)
    if decision is None:
        q_gen = (0.0,) * len(gens)
        q_comp = (0.0,) * len(case.compensators)
    else:
        q_gen = decision.q_generators
        q_comp = decision.q_compensators
        if len(q_gen) != len(gens) or len(q_comp) != len(case.compensators):
            raise ValueError("decision vector does not match the case sources")

    for gen, q_out in zip(gens, q_gen):
        k = case.index_of(gen.bus)
        p[k] += gen.p_output
        if generators_pv:
            roles[k] = int(BusRole.PV)
            v_set[k] = 1.0
        else:
            q[k] += q_out
    for comp, q_out in zip(case.compensators, q_comp):
        if comp.bus == case.slack_bus().id:
            continue
        q[case.index_of(comp.bus)] += q_out

    return InjectionSpec(p=p, q=q, roles=roles, v_setpoint=v_set)


def voltage_penalty(solution: PowerFlowSolution, case: NetworkCase) -> float:
    """Unweighted quadratic violation of the per-bus voltage bands."""
    v_min = np.array([b.v_min for b in case.buses])
    v_max = np.array([b.v_max for b in case.buses])
    over = np.maximum(0.0, solution.v - v_max)
    under = np.maximum(0.0, v_min - solution.v)
    return float(np.sum(over * over + under * under))


def evaluate_fitness(
    case: NetworkCase,
    decision: DecisionVector,
    penalties: PenaltyConfig | None = None,
    options: SolverOptions | None = None,
    ybus: AdmittanceMatrix | None = None,
) -> float:
    """Objective cost plus exterior penalties at one decision.

    Pure in its inputs, so swarm evaluations can run in any order.
    """
    pen = penalties or PenaltyConfig()
    costs = total_reactive_cost(case, decision.q_generators, decision.q_compensators)
    solution = solve_power_flow(case, build_injections(case, decision), options, ybus)
    value = costs.total + pen.voltage_weight * voltage_penalty(solution, case)
    if not solution.converged:
        value += pen.nonconvergence_penalty
    return value


def baseline_loss(
    case: NetworkCase,
    options: SolverOptions | None = None,
    ybus: AdmittanceMatrix | None = None,
) -> tuple[PowerFlowSolution, float]:
    """Reference flow before compensation: compensators off, generator buses
    voltage-held at 1.0 p.u. Raises DispatchError if it does not converge."""
    spec = build_injections(case, None, generators_pv=True)
    solution = solve_power_flow(case, spec, options, ybus)
    if not solution.converged:
        raise DispatchError(
            f"baseline power flow did not converge (residual {solution.max_mismatch:.3e})"
        )
    return solution, solution.total_loss


def run_ropf(
    case: NetworkCase,
    params: PsoParams | None = None,
    penalties: PenaltyConfig | None = None,
    options: SolverOptions | None = None,
) -> RopfReport:
    """Minimize the total reactive support cost subject to the power flow.

    Decision dimensions whose limits pin them to a single value are held
    there and kept out of the swarm; with nothing left to optimize the
    pinned decision is evaluated directly.
    """
    params = params or PsoParams()
    pen = penalties or PenaltyConfig()
    opts = options or SolverOptions()
    ybus = build_admittance(case)

    _, loss_before = baseline_loss(case, opts, ybus)

    gens = dispatchable_generators(case)
    kinds = ("generator",) * len(gens) + ("compensator",) * len(case.compensators)
    buses = tuple(g.bus for g in gens) + tuple(c.bus for c in case.compensators)
    bounds = decision_bounds(case)
    free = [k for k, (lo, hi) in enumerate(bounds) if lo < hi]
    pinned = {k: bounds[k][0] for k in range(len(bounds)) if k not in free}

    def assemble(x: np.ndarray) -> DecisionVector:
        full = np.empty(len(bounds))
        for k, value in pinned.items():
            full[k] = value
        full[free] = x
        return DecisionVector.from_array(case, full)

    def fitness(x: np.ndarray) -> float:
        return evaluate_fitness(case, assemble(x), pen, opts, ybus)

    if free:
        result = pso.optimize(fitness, [bounds[k] for k in free], params)
        decision = assemble(result.position)
        gbest = result.fitness
        history = result.history
    else:
        decision = assemble(np.empty(0))
        gbest = evaluate_fitness(case, decision, pen, opts, ybus)
        history = (gbest,)

    solution = solve_power_flow(case, build_injections(case, decision), opts, ybus)
    costs = total_reactive_cost(case, decision.q_generators, decision.q_compensators)
    residual_penalty = voltage_penalty(solution, case)
    feasible = solution.converged and residual_penalty == 0.0
    if not feasible:
        logger.warning(
            "best decision is infeasible: converged=%s voltage penalty=%.3e fitness=%.6g",
            solution.converged,
            residual_penalty,
            gbest,
        )

    loss_before_alt: float | None = None
    if gens:
        alt_decision = DecisionVector(
            q_generators=decision.q_generators,
            q_compensators=(0.0,) * len(case.compensators),
        )
        alt = solve_power_flow(case, build_injections(case, alt_decision), opts, ybus)
        if alt.converged:
            loss_before_alt = alt.total_loss

    per_source = costs.generator_costs + costs.compensator_costs
    return RopfReport(
        source_kinds=kinds,
        source_buses=buses,
        var_requirements=decision.q_generators + decision.q_compensators,
        cost_per_source=per_source,
        total_payment=float(sum(per_source)),
        loss_before=loss_before,
        loss_after=solution.total_loss,
        loss_before_alt=loss_before_alt,
        feasible=feasible,
        converged=solution.converged,
        gbest_fitness=gbest,
        convergence_history=tuple(history),
        seed=params.seed,
        params=params,
        penalties=pen,
        bus_ids=tuple(b.id for b in case.buses),
        bus_voltages=tuple(float(x) for x in solution.v),
        bus_angles=tuple(float(x) for x in solution.delta),
    )


def unity_power_factor_case(case: NetworkCase) -> NetworkCase:
    """The same network with every load's reactive draw set to zero."""
    return replace(case, loads=tuple(replace(load, q=0.0) for load in case.loads))


def duty_cost(
    case: NetworkCase,
    params: PsoParams | None = None,
    penalties: PenaltyConfig | None = None,
    options: SolverOptions | None = None,
) -> float:
    """Reactive cost the network itself demands: the optimal total cost when
    all loads run at unity power factor. This part is owed by the
    active-power sellers, not by the reactive loads."""
    report = run_ropf(unity_power_factor_case(case), params, penalties, options)
    if not report.feasible:
        logger.warning("unity-power-factor run infeasible; duty cost is its best-found cost")
    return report.total_payment


def allocate_payments(report: RopfReport, duty: "RopfReport | float") -> Payments:
    """Split the run's costs into payments.

    Loads owe the cost beyond the duty cost (floored at zero). The duty
    cost is charged back to the generators, split in proportion to their
    costs in the unity-power-factor run when that report is given (equal
    proportions to their own incurred costs when only a scalar duty cost is
    available). Each generator receives its incurred cost minus its duty
    share, floored at zero; compensators receive their full cost.
    """
    gen_idx = [k for k, kind in enumerate(report.source_kinds) if kind == "generator"]
    comp_idx = [k for k, kind in enumerate(report.source_kinds) if kind == "compensator"]
    incurred = [report.cost_per_source[k] for k in gen_idx]

    if isinstance(duty, RopfReport):
        cg = duty.total_payment
        weights = [duty.cost_per_source[k] for k, kind in enumerate(duty.source_kinds) if kind == "generator"]
        if len(weights) != len(gen_idx):
            raise ValueError("duty report does not match the run's generator set")
    else:
        cg = float(duty)
        weights = list(incurred)
    if cg < 0:
        raise ValueError(f"duty cost must be nonnegative, got {cg}")

    if not gen_idx or cg == 0.0:
        shares = [0.0] * len(gen_idx)
    else:
        total_weight = sum(weights)
        if total_weight > 0:
            shares = [cg * w / total_weight for w in weights]
        else:
            shares = [cg / len(gen_idx)] * len(gen_idx)

    gen_payments = tuple(max(0.0, inc - share) for inc, share in zip(incurred, shares))
    comp_payments = tuple(report.cost_per_source[k] for k in comp_idx)
    load_allocated = max(0.0, report.total_payment - cg)
    return Payments(
        generator_payments=gen_payments,
        compensator_payments=comp_payments,
        duty_shares=tuple(shares),
        load_allocated=load_allocated,
        total=float(sum(gen_payments) + sum(comp_payments)),
    )


def run_pricing(
    case: NetworkCase,
    params: PsoParams | None = None,
    penalties: PenaltyConfig | None = None,
    options: SolverOptions | None = None,
) -> tuple[RopfReport, Payments]:
    """Full settlement: dispatch run, unity-power-factor run, allocation."""
    report = run_ropf(case, params, penalties, options)
    duty_report = run_ropf(unity_power_factor_case(case), params, penalties, options)
    payments = allocate_payments(report, duty_report)
    report = replace(
        report,
        duty_cost=duty_report.total_payment,
        load_allocated_cost=payments.load_allocated,
    )
    return report, payments


def report_to_dict(report: RopfReport, payments: Payments | None = None) -> dict:
    """JSON-ready view of a report (plain lists and floats only)."""
    doc: dict = {
        "sources": [
            {
                "kind": kind,
                "bus": bus,
                "q_pu": q,
                "cost_per_h": cost,
            }
            for kind, bus, q, cost in zip(
                report.source_kinds,
                report.source_buses,
                report.var_requirements,
                report.cost_per_source,
            )
        ],
        "loss_before_pu": report.loss_before,
        "loss_after_pu": report.loss_after,
        "loss_before_alt_pu": report.loss_before_alt,
        "total_payment_per_h": report.total_payment,
        "feasible": report.feasible,
        "converged": report.converged,
        "gbest_fitness": report.gbest_fitness,
        "convergence_history": list(report.convergence_history),
        "seed": report.seed,
        "bus_ids": list(report.bus_ids),
        "bus_voltages_pu": list(report.bus_voltages),
        "bus_angles_rad": list(report.bus_angles),
        "duty_cost_per_h": report.duty_cost,
        "load_allocated_per_h": report.load_allocated_cost,
    }
    if payments is not None:
        doc["payments"] = {
            "generators": list(payments.generator_payments),
            "compensators": list(payments.compensator_payments),
            "duty_shares": list(payments.duty_shares),
            "load_allocated_per_h": payments.load_allocated,
            "total_per_h": payments.total,
        }
    return doc


def render_text(report: RopfReport, payments: Payments | None = None) -> str:
    """Human-readable report: source table, losses, payment lines."""
    out: list[str] = []
    out.append("reactive support dispatch")
    out.append(
        f"seed {report.seed}  swarm {report.params.swarm_size}  "
        f"iterations {report.params.max_iterations}"
    )
    out.append("")
    out.append(f"{'source':<14}{'bus':>5}{'Q (p.u.)':>12}{'cost ($/h)':>14}")
    for kind, bus, q, cost in zip(
        report.source_kinds, report.source_buses, report.var_requirements, report.cost_per_source
    ):
        out.append(f"{kind:<14}{bus:>5}{q:>12.4f}{cost:>14.4f}")
    out.append("")
    out.append(f"power loss before compensation  {report.loss_before:.6f} p.u.")
    if report.loss_before_alt is not None and report.loss_before > 0 and (
        abs(report.loss_before_alt - report.loss_before) > 0.01 * report.loss_before
    ):
        out.append(
            f"power loss before compensation  {report.loss_before_alt:.6f} p.u. "
            "(generators already at their optimized reactive output)"
        )
    out.append(f"power loss after compensation   {report.loss_after:.6f} p.u.")
    out.append(f"payment to generators and compensators  {report.total_payment:.4f} $/h")
    out.append(f"feasible: {'yes' if report.feasible else 'NO'}")
    if report.duty_cost is not None:
        out.append("")
        out.append(f"duty cost (unity power factor)  {report.duty_cost:.4f} $/h")
        out.append(f"cost allocated to reactive loads  {report.load_allocated_cost:.4f} $/h")
    if payments is not None:
        out.append("")
        out.append("settled payments ($/h)")
        gen_buses = [
            bus for bus, kind in zip(report.source_buses, report.source_kinds)
            if kind == "generator"
        ]
        comp_buses = [
            bus for bus, kind in zip(report.source_buses, report.source_kinds)
            if kind == "compensator"
        ]
        for bus, pay in zip(gen_buses, payments.generator_payments):
            out.append(f"  generator bus {bus:<4} {pay:>10.4f}")
        for bus, pay in zip(comp_buses, payments.compensator_payments):
            out.append(f"  compensator bus {bus:<4} {pay:>10.4f}")
        out.append(f"  total {payments.total:>10.4f}")
    return "\n".join(out) + "\n"
