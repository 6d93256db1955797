"""Module entry point: python -m ropf <command> <case>."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
