"""Network data model: buses, branches, reactive sources, loads.

Includes the case-file parser, structural validation, and construction of
the bus admittance matrix. All electrical quantities are per-unit on the
case MVA base unless a field says otherwise ($ figures use base_mva to
convert). Bus ids are arbitrary positive integers; matrix work uses the
0-based position of a bus in the case bus list (see NetworkCase.index_of).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "AdmittanceMatrix",
    "Branch",
    "Bus",
    "BUS_KINDS",
    "CaseError",
    "Compensator",
    "CostQuadratic",
    "DEFAULT_V_MAX",
    "DEFAULT_V_MIN",
    "Generator",
    "Load",
    "NetworkCase",
    "build_admittance",
    "parse_case",
    "serialize_case",
    "validate_case",
]

DEFAULT_V_MIN = 0.95
DEFAULT_V_MAX = 1.05

BUS_KINDS = ("slack", "generator", "load", "compensator")


class CaseError(ValueError):
    """Malformed case file or structurally unusable network data."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Bus:
    """A network node.

    kind is one of BUS_KINDS. "slack" marks the reference machine (angle
    fixed at zero, absorbs the power balance residual); the other kinds are
    descriptive. A bus may host a load together with a generator or
    compensator. Voltage bounds are per-unit magnitudes.
    """

    id: int
    kind: str
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX


@dataclass(frozen=True)
class Branch:
    """A transmission line or transformer between two buses.

    Plain lines use the pi model: series impedance r + jx with the total
    charging susceptance split half to each terminal. Transformers carry an
    off-nominal tap on the from side and no charging. tap_ratio = 1 means a
    plain line.
    """

    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    charging_susceptance: float = 0.0
    tap_ratio: float = 1.0

    @property
    def is_transformer(self) -> bool:
        return self.tap_ratio != 1.0


@dataclass(frozen=True)
class CostQuadratic:
    """Active generation cost a + b*p + c*p**2, p in per-unit, result $/h."""

    a: float
    b: float
    c: float

    def __call__(self, p: float) -> float:
        return self.a + self.b * p + self.c * p * p


@dataclass(frozen=True)
class Generator:
    """A dispatchable machine offering reactive support.

    p_output is the scheduled active output, s_max the apparent power
    capability. Reactive output is bounded by [q_min, q_max]. profit_rate
    is the fraction of lost active-power revenue recovered as the reactive
    opportunity cost.
    """

    bus: int
    p_output: float
    s_max: float
    q_min: float
    q_max: float
    cost: CostQuadratic
    profit_rate: float


@dataclass(frozen=True)
class Compensator:
    """A switched reactive source paid at a flat $/MVArh rate."""

    bus: int
    q_min: float
    q_max: float
    rate: float


@dataclass(frozen=True)
class Load:
    """Demand drawn at a bus, per-unit. Positive values consume."""

    bus: int
    p: float
    q: float


@dataclass(frozen=True)
class NetworkCase:
    """An immutable snapshot of the whole network."""

    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    compensators: tuple[Compensator, ...] = ()
    loads: tuple[Load, ...] = ()

    @property
    def n(self) -> int:
        return len(self.buses)

    @cached_property
    def _index(self) -> dict[int, int]:
        return {bus.id: pos for pos, bus in enumerate(self.buses)}

    def index_of(self, bus_id: int) -> int:
        """0-based matrix position of a bus id."""
        try:
            return self._index[bus_id]
        except KeyError:
            raise CaseError(f"unknown bus {bus_id}") from None

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.index_of(bus_id)]

    def slack_bus(self) -> Bus:
        slacks = [b for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise CaseError(f"expected one slack bus, found {len(slacks)}")
        return slacks[0]


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    """Dense complex bus admittance matrix, read-only once built."""

    n: int
    matrix: np.ndarray


_SECTIONS = (
    "BASE_MVA",
    "BUS",
    "GENERATOR",
    "COMPENSATOR",
    "BRANCH",
    "TRANSFORMER",
    "LOAD",
)

_HEADER_RE = re.compile(r"\[([A-Z_]+)\]")


def _num(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise CaseError(f"bad {what} {token!r}", line) from None


def _int(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CaseError(f"bad {what} {token!r}", line) from None


def parse_case(text: str) -> NetworkCase:
    """Parse case-file text into a validated NetworkCase.

    Format: sections introduced by a [NAME] header, one whitespace-separated
    record per line, '#' starts a comment. Sections:

        [BASE_MVA]     base
        [BUS]          id kind [v_min v_max]
        [GENERATOR]    bus p_out s_max q_min q_max a b c k
        [COMPENSATOR]  bus q_min q_max rate
        [BRANCH]       from to r x b
        [TRANSFORMER]  from to r x tap
        [LOAD]         bus p q

    Raises CaseError with a line number on syntax problems, unknown bus
    references, a duplicate slack, or a declared-but-empty section. A
    negative load only warns; this model treats demand as nonnegative but
    the format permits general signs.
    """
    rows: dict[str, list[tuple[int, list[str]]]] = {name: [] for name in _SECTIONS}
    declared: list[str] = []
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER_RE.fullmatch(line)
        if m:
            name = m.group(1)
            if name not in _SECTIONS:
                raise CaseError(f"unknown section [{name}]", lineno)
            if name not in declared:
                declared.append(name)
            current = name
            continue
        if current is None:
            raise CaseError("record before any section header", lineno)
        rows[current].append((lineno, line.split()))

    for name in declared:
        if not rows[name]:
            raise CaseError(f"empty section [{name}]")
    if not rows["BUS"]:
        raise CaseError("missing [BUS] section")

    base_mva = 100.0
    if rows["BASE_MVA"]:
        base_rows = rows["BASE_MVA"]
        lineno, tok = base_rows[0]
        if len(base_rows) != 1 or len(tok) != 1:
            raise CaseError("[BASE_MVA] holds exactly one value", lineno)
        base_mva = _num(tok[0], lineno, "base MVA")
        if base_mva <= 0:
            raise CaseError("base MVA must be positive", lineno)

    buses: list[Bus] = []
    ids: set[int] = set()
    have_slack = False
    for lineno, tok in rows["BUS"]:
        if len(tok) not in (2, 4):
            raise CaseError("BUS record is 'id kind [v_min v_max]'", lineno)
        bus_id = _int(tok[0], lineno, "bus id")
        kind = tok[1].lower()
        if kind not in BUS_KINDS:
            raise CaseError(f"unknown bus kind {tok[1]!r}", lineno)
        if bus_id in ids:
            raise CaseError(f"duplicate bus id {bus_id}", lineno)
        if kind == "slack":
            if have_slack:
                raise CaseError("duplicate slack bus", lineno)
            have_slack = True
        if len(tok) == 4:
            v_min = _num(tok[2], lineno, "v_min")
            v_max = _num(tok[3], lineno, "v_max")
        else:
            v_min, v_max = DEFAULT_V_MIN, DEFAULT_V_MAX
        ids.add(bus_id)
        buses.append(Bus(bus_id, kind, v_min, v_max))

    def known(token: str, lineno: int) -> int:
        bus_id = _int(token, lineno, "bus id")
        if bus_id not in ids:
            raise CaseError(f"unknown bus {bus_id}", lineno)
        return bus_id

    generators: list[Generator] = []
    for lineno, tok in rows["GENERATOR"]:
        if len(tok) != 9:
            raise CaseError("GENERATOR record is 'bus p_out s_max q_min q_max a b c k'", lineno)
        vals = [_num(t, lineno, "generator field") for t in tok[1:]]
        generators.append(
            Generator(
                bus=known(tok[0], lineno),
                p_output=vals[0],
                s_max=vals[1],
                q_min=vals[2],
                q_max=vals[3],
                cost=CostQuadratic(vals[4], vals[5], vals[6]),
                profit_rate=vals[7],
            )
        )

    compensators: list[Compensator] = []
    for lineno, tok in rows["COMPENSATOR"]:
        if len(tok) != 4:
            raise CaseError("COMPENSATOR record is 'bus q_min q_max rate'", lineno)
        compensators.append(
            Compensator(
                bus=known(tok[0], lineno),
                q_min=_num(tok[1], lineno, "q_min"),
                q_max=_num(tok[2], lineno, "q_max"),
                rate=_num(tok[3], lineno, "rate"),
            )
        )

    branches: list[Branch] = []
    for lineno, tok in rows["BRANCH"]:
        if len(tok) != 5:
            raise CaseError("BRANCH record is 'from to r x b'", lineno)
        branches.append(
            Branch(
                from_bus=known(tok[0], lineno),
                to_bus=known(tok[1], lineno),
                resistance=_num(tok[2], lineno, "resistance"),
                reactance=_num(tok[3], lineno, "reactance"),
                charging_susceptance=_num(tok[4], lineno, "susceptance"),
            )
        )
    for lineno, tok in rows["TRANSFORMER"]:
        if len(tok) != 5:
            raise CaseError("TRANSFORMER record is 'from to r x tap'", lineno)
        branches.append(
            Branch(
                from_bus=known(tok[0], lineno),
                to_bus=known(tok[1], lineno),
                resistance=_num(tok[2], lineno, "resistance"),
                reactance=_num(tok[3], lineno, "reactance"),
                tap_ratio=_num(tok[4], lineno, "tap ratio"),
            )
        )

    loads: list[Load] = []
    for lineno, tok in rows["LOAD"]:
        if len(tok) != 3:
            raise CaseError("LOAD record is 'bus p q'", lineno)
        load = Load(
            bus=known(tok[0], lineno),
            p=_num(tok[1], lineno, "load p"),
            q=_num(tok[2], lineno, "load q"),
        )
        if load.p < 0 or load.q < 0:
            warnings.warn(f"line {lineno}: negative load at bus {load.bus}", stacklevel=2)
        loads.append(load)

    case = NetworkCase(
        base_mva=base_mva,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
        compensators=tuple(compensators),
        loads=tuple(loads),
    )
    violations = validate_case(case)
    if violations:
        raise CaseError("invalid case: " + "; ".join(violations))
    return case


def serialize_case(case: NetworkCase) -> str:
    """Render a NetworkCase back to case-file text.

    parse_case(serialize_case(case)) reproduces the case exactly: floats are
    written with repr so they round-trip bit for bit.
    """
    out: list[str] = ["[BASE_MVA]", f"{case.base_mva!r}", "", "[BUS]"]
    for bus in case.buses:
        out.append(f"{bus.id} {bus.kind} {bus.v_min!r} {bus.v_max!r}")
    if case.generators:
        out += ["", "[GENERATOR]"]
        for g in case.generators:
            out.append(
                f"{g.bus} {g.p_output!r} {g.s_max!r} {g.q_min!r} {g.q_max!r} "
                f"{g.cost.a!r} {g.cost.b!r} {g.cost.c!r} {g.profit_rate!r}"
            )
    if case.compensators:
        out += ["", "[COMPENSATOR]"]
        for c in case.compensators:
            out.append(f"{c.bus} {c.q_min!r} {c.q_max!r} {c.rate!r}")
    lines = [b for b in case.branches if not b.is_transformer]
    taps = [b for b in case.branches if b.is_transformer]
    if lines:
        out += ["", "[BRANCH]"]
        for b in lines:
            out.append(
                f"{b.from_bus} {b.to_bus} {b.resistance!r} {b.reactance!r} "
                f"{b.charging_susceptance!r}"
            )
    if taps:
        out += ["", "[TRANSFORMER]"]
        for b in taps:
            if b.charging_susceptance != 0.0:
                raise CaseError(
                    f"branch {b.from_bus}-{b.to_bus}: the file format cannot "
                    "express both an off-nominal tap and line charging"
                )
            out.append(f"{b.from_bus} {b.to_bus} {b.resistance!r} {b.reactance!r} {b.tap_ratio!r}")
    if case.loads:
        out += ["", "[LOAD]"]
        for ld in case.loads:
            out.append(f"{ld.bus} {ld.p!r} {ld.q!r}")
    return "\n".join(out) + "\n"


def validate_case(case: NetworkCase) -> list[str]:
    """Check structural invariants; returns human-readable violations.

    An empty list means the case is usable for power-flow and dispatch work.
    Checks: positive base, unique bus ids, exactly one slack, sane voltage
    bands, branch endpoints that exist and differ, nonzero branch impedance,
    positive taps, source limits ordered and within capability, referenced
    buses present, and a connected network.
    """
    bad: list[str] = []
    if case.base_mva <= 0:
        bad.append(f"base MVA must be positive, got {case.base_mva}")

    seen: set[int] = set()
    slack_ids: list[int] = []
    for bus in case.buses:
        if bus.id in seen:
            bad.append(f"duplicate bus id {bus.id}")
        seen.add(bus.id)
        if bus.kind not in BUS_KINDS:
            bad.append(f"bus {bus.id}: unknown kind {bus.kind!r}")
        if bus.kind == "slack":
            slack_ids.append(bus.id)
        if not (0.0 < bus.v_min < bus.v_max):
            bad.append(f"bus {bus.id}: voltage band [{bus.v_min}, {bus.v_max}] is not ordered")
    if not case.buses:
        bad.append("case has no buses")
    elif len(slack_ids) == 0:
        bad.append("no slack bus")
    elif len(slack_ids) > 1:
        bad.append("duplicate slack: buses " + ", ".join(str(i) for i in slack_ids))

    for br in case.branches:
        label = f"branch {br.from_bus}-{br.to_bus}"
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                bad.append(f"{label}: unknown bus {end}")
        if br.from_bus == br.to_bus:
            bad.append(f"{label}: endpoints must differ")
        if br.resistance == 0.0 and br.reactance == 0.0:
            bad.append(f"{label}: zero impedance")
        if br.tap_ratio <= 0.0:
            bad.append(f"{label}: tap ratio must be positive, got {br.tap_ratio}")

    for g in case.generators:
        label = f"generator at bus {g.bus}"
        if g.bus not in seen:
            bad.append(f"{label}: unknown bus {g.bus}")
        if g.s_max <= 0:
            bad.append(f"{label}: s_max must be positive")
        if g.q_min > g.q_max:
            bad.append(f"{label}: q_min {g.q_min} exceeds q_max {g.q_max}")
        if max(abs(g.q_min), abs(g.q_max)) > g.s_max:
            bad.append(f"{label}: reactive limits exceed s_max {g.s_max}")
        if g.p_output > g.s_max:
            bad.append(f"{label}: p_output {g.p_output} exceeds s_max {g.s_max}")
        if g.p_output < 0:
            bad.append(f"{label}: p_output must be nonnegative")
        if g.cost.c < 0:
            bad.append(f"{label}: quadratic cost coefficient must be nonnegative")
        if g.profit_rate < 0:
            bad.append(f"{label}: profit rate must be nonnegative")

    for c in case.compensators:
        label = f"compensator at bus {c.bus}"
        if c.bus not in seen:
            bad.append(f"{label}: unknown bus {c.bus}")
        if not (0.0 <= c.q_min <= c.q_max):
            bad.append(f"{label}: limits [{c.q_min}, {c.q_max}] must satisfy 0 <= q_min <= q_max")
        if c.rate < 0:
            bad.append(f"{label}: rate must be nonnegative")

    for ld in case.loads:
        if ld.bus not in seen:
            bad.append(f"load at bus {ld.bus}: unknown bus {ld.bus}")

    if case.buses and not any(b.startswith("duplicate bus id") for b in bad):
        adjacency: dict[int, set[int]] = {bus.id: set() for bus in case.buses}
        for br in case.branches:
            if br.from_bus in adjacency and br.to_bus in adjacency:
                adjacency[br.from_bus].add(br.to_bus)
                adjacency[br.to_bus].add(br.from_bus)
        reached = {case.buses[0].id}
        frontier = [case.buses[0].id]
        while frontier:
            nxt = frontier.pop()
            for other in adjacency[nxt]:
                if other not in reached:
                    reached.add(other)
                    frontier.append(other)
        missing = sorted(seen - reached)
        if missing:
            bad.append("disconnected network: no path to buses " + ", ".join(map(str, missing)))

    return bad


def build_admittance(case: NetworkCase) -> AdmittanceMatrix:
    """Assemble the dense complex bus admittance matrix.

    Plain line (tap 1): series y = 1/(r + jx) plus half the charging at
    each terminal. Off-nominal tap a on the from side: y/a**2 at the from
    diagonal, y at the to diagonal, -y/a on both off-diagonals, which keeps
    the matrix symmetric.
    """
    n = case.n
    y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if br.resistance == 0.0 and br.reactance == 0.0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus}: zero impedance")
        i = case.index_of(br.from_bus)
        j = case.index_of(br.to_bus)
        series = 1.0 / complex(br.resistance, br.reactance)
        shunt = 0.5j * br.charging_susceptance
        a = br.tap_ratio
        y[i, i] += (series + shunt) / (a * a)
        y[j, j] += series + shunt
        y[i, j] -= series / a
        y[j, i] -= series / a
    y.flags.writeable = False
    return AdmittanceMatrix(n=n, matrix=y)
