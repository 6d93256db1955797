"""Bundled case files."""

from importlib import resources

from ..netmodel import NetworkCase, parse_case

__all__ = ["case_text", "load_case"]


def case_text(name: str = "ieee14") -> str:
    """Raw text of a bundled case file."""
    return resources.files(__package__).joinpath(f"{name}.case").read_text(encoding="utf-8")


def load_case(name: str = "ieee14") -> NetworkCase:
    """Parse a bundled case file."""
    return parse_case(case_text(name))
