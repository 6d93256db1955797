"""Reactive support costs.

A generator asked for reactive output q must back its active output away
from full apparent capability; its price is the lost-profit opportunity
cost. A compensator is paid a flat depreciation rate per MVArh. All costs
are $/h; reactive quantities are per-unit, converted with the case MVA base
where a rate is quoted per MVArh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .netmodel import Compensator, Generator, NetworkCase

__all__ = [
    "ReactiveCostBreakdown",
    "compensator_cost",
    "depreciation_rate",
    "dispatchable_generators",
    "generator_opportunity_cost",
    "total_reactive_cost",
]

HOURS_PER_YEAR = 365 * 24


def generator_opportunity_cost(gen: Generator, q: float) -> float:
    """Opportunity cost, $/h, of holding reactive output q on a machine.

    The machine could sell active power up to s_max; producing q caps the
    active side at sqrt(s_max**2 - q**2). The cost is the active-cost gap
    between those outputs scaled by the profit rate. Even in q, zero at
    q = 0, increasing in |q|.
    """
    if abs(q) > gen.s_max + 1e-12:
        raise ValueError(f"|q| = {abs(q)} exceeds apparent capability {gen.s_max}")
    p_capped = math.sqrt(max(gen.s_max * gen.s_max - q * q, 0.0))
    return (gen.cost(gen.s_max) - gen.cost(p_capped)) * gen.profit_rate


def compensator_cost(comp: Compensator, q: float, base_mva: float) -> float:
    """Payment to a compensator, $/h: rate ($/MVArh) times MVAr supplied."""
    if q < comp.q_min - 1e-12 or q > comp.q_max + 1e-12:
        raise ValueError(
            f"compensator at bus {comp.bus}: q = {q} outside [{comp.q_min}, {comp.q_max}]"
        )
    return comp.rate * q * base_mva


def depreciation_rate(investment: float, lifespan_years: float, working_rate: float) -> float:
    """Capital cost per MVArh: investment spread over working hours.

    investment is $/MVAr installed, lifespan in years, working_rate the
    fraction of calendar time the device is in service.
    """
    if investment <= 0 or lifespan_years <= 0 or not (0 < working_rate <= 1):
        raise ValueError("investment and lifespan must be positive, working rate in (0, 1]")
    return investment / (lifespan_years * HOURS_PER_YEAR * working_rate)


def dispatchable_generators(case: NetworkCase) -> tuple[Generator, ...]:
    """Generators priced for reactive support: every machine not at the slack bus.

    The slack machine absorbs the system balance and is not a priced
    participant.
    """
    slack_id = case.slack_bus().id
    return tuple(g for g in case.generators if g.bus != slack_id)


@dataclass(frozen=True)
class ReactiveCostBreakdown:
    """Per-source reactive support costs, $/h. total is their exact sum."""

    generator_costs: tuple[float, ...]
    compensator_costs: tuple[float, ...]
    total: float


def total_reactive_cost(
    case: NetworkCase,
    q_generators: tuple[float, ...] | list[float],
    q_compensators: tuple[float, ...] | list[float],
) -> ReactiveCostBreakdown:
    """Objective value of a reactive dispatch: sum of all source costs.

    q_generators pairs with the non-slack generators in case order,
    q_compensators with the compensators in case order. Each output must
    lie within its source limits.
    """
    gens = dispatchable_generators(case)
    if len(q_generators) != len(gens):
        raise ValueError(f"expected {len(gens)} generator outputs, got {len(q_generators)}")
    if len(q_compensators) != len(case.compensators):
        raise ValueError(
            f"expected {len(case.compensators)} compensator outputs, got {len(q_compensators)}"
        )
    gen_costs = []
    for gen, q in zip(gens, q_generators):
        if q < gen.q_min - 1e-12 or q > gen.q_max + 1e-12:
            raise ValueError(
                f"generator at bus {gen.bus}: q = {q} outside [{gen.q_min}, {gen.q_max}]"
            )
        gen_costs.append(generator_opportunity_cost(gen, q))
    comp_costs = [
        compensator_cost(comp, q, case.base_mva)
        for comp, q in zip(case.compensators, q_compensators)
    ]
    parts = gen_costs + comp_costs
    return ReactiveCostBreakdown(
        generator_costs=tuple(gen_costs),
        compensator_costs=tuple(comp_costs),
        total=float(sum(parts)),
    )
