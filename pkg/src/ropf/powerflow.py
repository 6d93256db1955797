"""Newton-Raphson AC power flow in polar form.

Sign convention: specified injections are net (generation minus demand).
Computed injections at a voltage state follow S = V * conj(Y @ V), which in
polar terms is

    P_i =  |V_i| * sum_j |V_j| |Y_ij| cos(theta_ij + delta_j - delta_i)
    Q_i = -|V_i| * sum_j |V_j| |Y_ij| sin(theta_ij + delta_j - delta_i)

Mismatch is specified minus computed. The slack bus contributes no residual
(it absorbs the balance), PV buses contribute only an active residual.
Non-convergence is reported through the converged flag, never an exception,
so an optimizer can penalize it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .netmodel import AdmittanceMatrix, NetworkCase, build_admittance

__all__ = [
    "BusRole",
    "BusState",
    "InjectionSpec",
    "PowerFlowSolution",
    "SolverOptions",
    "compute_mismatch",
    "mismatch_jacobian",
    "solve_power_flow",
    "total_losses",
]


class BusRole(IntEnum):
    SLACK = 0
    PQ = 1
    PV = 2


@dataclass(frozen=True)
class BusState:
    """Voltage magnitude (per-unit) and angle (radians) at one bus."""

    v: float
    delta: float


@dataclass(frozen=True, eq=False)
class InjectionSpec:
    """Specified net injections and bus roles, index-aligned with a case.

    p and q are per-unit net injections. The slack entry of both and the
    q entry of PV buses are ignored; those quantities are outcomes, not
    inputs. v_setpoint holds the magnitude targets for the slack and PV
    buses (entries elsewhere are ignored).
    """

    p: np.ndarray
    q: np.ndarray
    roles: np.ndarray
    v_setpoint: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        roles = np.asarray(self.roles, dtype=int)
        v_set = np.asarray(self.v_setpoint, dtype=float)
        if not (p.shape == q.shape == roles.shape == v_set.shape):
            raise ValueError("injection arrays must share one shape per bus")
        if int(np.sum(roles == BusRole.SLACK)) != 1:
            raise ValueError("exactly one slack bus required")
        held = (roles == BusRole.SLACK) | (roles == BusRole.PV)
        if np.any(v_set[held] <= 0):
            raise ValueError("slack and PV setpoints must be positive")
        for name, arr in (("p", p), ("q", q), ("roles", roles), ("v_setpoint", v_set)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def slack_index(self) -> int:
        return int(np.flatnonzero(self.roles == BusRole.SLACK)[0])


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-6
    max_iterations: int = 50
    flat_start: bool = True


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    """Solved (or last attempted) operating point.

    p_injected / q_injected are the net injections computed from the final
    voltages; at a converged solution the non-slack entries match the
    specification within tolerance and the slack entries are the balance.
    total_loss is the network active loss of this state.
    """

    v: np.ndarray
    delta: np.ndarray
    p_injected: np.ndarray
    q_injected: np.ndarray
    iterations: int
    max_mismatch: float
    converged: bool
    p_slack: float
    q_slack: float
    total_loss: float

    @property
    def states(self) -> tuple[BusState, ...]:
        return tuple(BusState(float(v), float(d)) for v, d in zip(self.v, self.delta))


def compute_mismatch(
    v: np.ndarray,
    delta: np.ndarray,
    spec: InjectionSpec,
    ybus: AdmittanceMatrix,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus residuals (specified minus computed) at a voltage state.

    Returns full arrays for inspection; the entries that are not solver
    constraints (slack rows, PV reactive rows) are included at face value
    of spec.p / spec.q and must be masked by the caller.
    """
    volt = np.asarray(v, float) * np.exp(1j * np.asarray(delta, float))
    s_calc = volt * np.conj(ybus.matrix @ volt)
    return spec.p - s_calc.real, spec.q - s_calc.imag


def mismatch_jacobian(
    v: np.ndarray,
    delta: np.ndarray,
    ybus: AdmittanceMatrix,
    pvpq: np.ndarray,
    pq: np.ndarray,
) -> np.ndarray:
    """Jacobian of the computed injections w.r.t. angles (pvpq) and magnitudes (pq).

    Rows: d P[pvpq], d Q[pq]; columns: d delta[pvpq], d |V|[pq]. The solver
    uses it as J dx = residual since residual = spec - computed.
    """
    volt = np.asarray(v, float) * np.exp(1j * np.asarray(delta, float))
    y = ybus.matrix
    current = y @ volt
    diag_v = np.diag(volt)
    diag_i = np.diag(current)
    diag_unit = np.diag(volt / np.abs(volt))

    ds_dangle = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dvm = diag_v @ np.conj(y @ diag_unit) + np.conj(diag_i) @ diag_unit

    j11 = ds_dangle[np.ix_(pvpq, pvpq)].real
    j12 = ds_dvm[np.ix_(pvpq, pq)].real
    j21 = ds_dangle[np.ix_(pq, pvpq)].imag
    j22 = ds_dvm[np.ix_(pq, pq)].imag
    return np.block([[j11, j12], [j21, j22]])


def _loss_both_ways(
    volt: np.ndarray, case: NetworkCase, ybus: AdmittanceMatrix
) -> tuple[float, float]:
    """Active loss via summed net injections and via per-branch series I**2 R."""
    injections = float(np.sum((volt * np.conj(ybus.matrix @ volt)).real))
    by_branch = 0.0
    for br in case.branches:
        vf = volt[case.index_of(br.from_bus)]
        vt = volt[case.index_of(br.to_bus)]
        series = 1.0 / complex(br.resistance, br.reactance)
        i_series = series * (vf / br.tap_ratio - vt)
        by_branch += br.resistance * float(np.abs(i_series) ** 2)
    return injections, by_branch


def total_losses(solution: PowerFlowSolution, case: NetworkCase) -> float:
    """Total active loss, cross-checked two ways.

    Computes the loss as the sum of net injections (slack included) and as
    the sum of branch series I**2 R; a disagreement beyond 1e-8 means the
    admittance model and the branch model have diverged, which is an
    internal bug, so it raises.
    """
    ybus = build_admittance(case)
    volt = solution.v * np.exp(1j * solution.delta)
    by_injection, by_branch = _loss_both_ways(volt, case, ybus)
    if abs(by_injection - by_branch) > 1e-8:
        raise AssertionError(
            f"loss cross-check failed: injections {by_injection!r} vs branches {by_branch!r}"
        )
    return by_injection


def solve_power_flow(
    case: NetworkCase,
    spec: InjectionSpec,
    options: SolverOptions | None = None,
    ybus: AdmittanceMatrix | None = None,
    start: tuple[np.ndarray, np.ndarray] | None = None,
) -> PowerFlowSolution:
    """Solve the AC power flow for the given injections.

    Flat start unless a (v, delta) pair is supplied. Voltage magnitudes of
    the slack and PV buses are held at their setpoints; the slack angle is
    zero. Returns converged=False (with the last usable state) when the
    residual norm is still above tolerance after max_iterations, or when a
    Newton step produces a singular system or an unusable voltage profile.
    """
    opts = options or SolverOptions()
    if ybus is None:
        ybus = build_admittance(case)
    if ybus.n != case.n or len(spec.roles) != case.n:
        raise ValueError("case, injection spec and admittance matrix sizes disagree")

    roles = spec.roles
    pv = np.flatnonzero(roles == BusRole.PV)
    pq = np.flatnonzero(roles == BusRole.PQ)
    pvpq = np.concatenate([pv, pq])
    slack = spec.slack_index

    if start is not None and not opts.flat_start:
        v = np.array(start[0], dtype=float)
        delta = np.array(start[1], dtype=float)
    else:
        v = np.ones(case.n)
        delta = np.zeros(case.n)
    v[slack] = spec.v_setpoint[slack]
    v[pv] = spec.v_setpoint[pv]
    delta[slack] = 0.0

    converged = False
    iterations = 0
    max_mismatch = np.inf
    while True:
        dp, dq = compute_mismatch(v, delta, spec, ybus)
        residual = np.concatenate([dp[pvpq], dq[pq]])
        max_mismatch = float(np.max(np.abs(residual))) if residual.size else 0.0
        if max_mismatch <= opts.tolerance:
            converged = True
            break
        if iterations >= opts.max_iterations:
            break
        jac = mismatch_jacobian(v, delta, ybus, pvpq, pq)
        try:
            dx = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(dx)):
            break
        v_next = v.copy()
        delta_next = delta.copy()
        delta_next[pvpq] += dx[: pvpq.size]
        v_next[pq] += dx[pvpq.size :]
        if not (np.all(np.isfinite(v_next)) and np.all(v_next > 0)):
            break
        v, delta = v_next, delta_next
        iterations += 1

    volt = v * np.exp(1j * delta)
    s_calc = volt * np.conj(ybus.matrix @ volt)
    loss, _ = _loss_both_ways(volt, case, ybus)
    v.flags.writeable = False
    delta.flags.writeable = False
    return PowerFlowSolution(
        v=v,
        delta=delta,
        p_injected=s_calc.real,
        q_injected=s_calc.imag,
        iterations=iterations,
        max_mismatch=max_mismatch,
        converged=converged,
        p_slack=float(s_calc.real[slack]),
        q_slack=float(s_calc.imag[slack]),
        total_loss=loss,
    )
