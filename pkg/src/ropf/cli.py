"""Command-line interface.

Commands: validate, powerflow, ropf, pricing. Exit codes: 0 success,
1 validation violations, 2 unreadable or malformed case data,
3 power flow or dispatch did not reach a feasible answer. With
--output-format machine-readable the output is JSON that is byte-identical
across runs with the same arguments except for the timestamp field.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dispatch import (
    DispatchError,
    PenaltyConfig,
    baseline_loss,
    build_injections,
    render_text,
    report_to_dict,
    run_pricing,
    run_ropf,
)
from .netmodel import CaseError, NetworkCase, parse_case, validate_case
from .pso import PsoParams

__all__ = ["RunConfig", "build_parser", "main"]

OK = 0
EXIT_VIOLATIONS = 1
EXIT_DATA = 2
EXIT_NO_CONVERGENCE = 3


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; embedded in every report."""

    case_path: str
    command: str
    seed: int = 1
    swarm_size: int = 30
    iterations: int = 300
    w_start: float = 1.2
    w_end: float = 0.9
    c1: float = 2.0
    c2: float = 2.0
    voltage_weight: float = 1e4
    output_format: str = "text"

    def pso_params(self) -> PsoParams:
        return PsoParams(
            swarm_size=self.swarm_size,
            max_iterations=self.iterations,
            w_start=self.w_start,
            w_end=self.w_end,
            c1=self.c1,
            c2=self.c2,
            seed=self.seed,
        )

    def penalties(self) -> PenaltyConfig:
        return PenaltyConfig(voltage_weight=self.voltage_weight)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ropf",
        description="Reactive power dispatch and pricing over an AC power flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("case_path", help="path to a case file")
        p.add_argument(
            "--output-format",
            choices=("text", "machine-readable"),
            default="text",
        )

    def add_search(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--swarm-size", type=int, default=30)
        p.add_argument("--iterations", type=int, default=300)
        p.add_argument("--w-start", type=float, default=1.2)
        p.add_argument("--w-end", type=float, default=0.9)
        p.add_argument("--c1", type=float, default=2.0)
        p.add_argument("--c2", type=float, default=2.0)
        p.add_argument("--voltage-weight", type=float, default=1e4)

    add_common(sub.add_parser("validate", help="check a case file, list violations"))
    add_common(sub.add_parser("powerflow", help="solve the reference flow, print voltages"))
    p_ropf = sub.add_parser("ropf", help="optimize reactive dispatch")
    add_common(p_ropf)
    add_search(p_ropf)
    p_pricing = sub.add_parser("pricing", help="dispatch plus payment settlement")
    add_common(p_pricing)
    add_search(p_pricing)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    values = {k: v for k, v in vars(args).items() if k in fields}
    if args.command == "ropf" or args.command == "pricing":
        values["iterations"] = args.iterations
        values["swarm_size"] = args.swarm_size
    return RunConfig(**values)


def _load_case(path: str) -> NetworkCase:
    text = Path(path).read_text(encoding="utf-8")
    return parse_case(text)


def _emit(config: RunConfig, body: dict, text: str) -> None:
    if config.output_format == "machine-readable":
        doc = {
            "config": dataclasses.asdict(config),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        doc.update(body)
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(text, end="")


def _cmd_validate(config: RunConfig) -> int:
    text = Path(config.case_path).read_text(encoding="utf-8")
    try:
        case = parse_case(text)
    except CaseError as exc:
        # Parse-level defects are reported as violations too, one per line.
        violations = [str(exc)]
    else:
        violations = validate_case(case)
    body = {"violations": violations}
    lines = [f"violation: {v}" for v in violations]
    lines.append(f"{len(violations)} violation(s)")
    _emit(config, body, "\n".join(lines) + "\n")
    return EXIT_VIOLATIONS if violations else OK


def _cmd_powerflow(config: RunConfig) -> int:
    case = _load_case(config.case_path)
    try:
        solution, loss = baseline_loss(case)
    except DispatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    body = {
        "bus_ids": [b.id for b in case.buses],
        "bus_voltages_pu": [float(x) for x in solution.v],
        "bus_angles_rad": [float(x) for x in solution.delta],
        "iterations": solution.iterations,
        "total_loss_pu": solution.total_loss,
        "slack_p_pu": solution.p_slack,
        "slack_q_pu": solution.q_slack,
    }
    lines = [f"{'bus':>5}{'V (p.u.)':>12}{'angle (deg)':>14}"]
    for bus, v, d in zip(case.buses, solution.v, solution.delta):
        lines.append(f"{bus.id:>5}{v:>12.5f}{math.degrees(d):>14.4f}")
    lines.append(f"converged in {solution.iterations} iterations")
    lines.append(f"total loss  {solution.total_loss:.6f} p.u.")
    _emit(config, body, "\n".join(lines) + "\n")
    return OK


def _cmd_ropf(config: RunConfig) -> int:
    case = _load_case(config.case_path)
    report = run_ropf(case, config.pso_params(), config.penalties())
    _emit(config, report_to_dict(report), render_text(report))
    return OK if report.feasible else EXIT_NO_CONVERGENCE


def _cmd_pricing(config: RunConfig) -> int:
    case = _load_case(config.case_path)
    report, payments = run_pricing(case, config.pso_params(), config.penalties())
    _emit(config, report_to_dict(report, payments), render_text(report, payments))
    return OK if report.feasible else EXIT_NO_CONVERGENCE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = _config_from_args(args)
    handlers = {
        "validate": _cmd_validate,
        "powerflow": _cmd_powerflow,
        "ropf": _cmd_ropf,
        "pricing": _cmd_pricing,
    }
    try:
        return handlers[config.command](config)
    except FileNotFoundError as exc:
        print(f"error: cannot read case file {exc.filename!r}", file=sys.stderr)
        return EXIT_DATA
    except (CaseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DispatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
