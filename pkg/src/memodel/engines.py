"""Uniform engine dispatch used by the CLI, the fuzz harness, and tests."""

from __future__ import annotations

from . import axiomatic, com, i2e, rob

ENGINES = ("axiomatic", "com", "rob", "i2e")


def run_engine(name: str, test, cfg, limits=None):
    """Allowed-outcome set of one engine; raises the engine's own errors."""
    if name == "axiomatic":
        return axiomatic.allowed_outcomes(test, cfg)
    if name == "com":
        return com.allowed_outcomes(test, cfg)
    if name == "rob":
        return rob.allowed_outcomes(test, cfg, limits=limits)
    if name == "i2e":
        return i2e.allowed_outcomes(test, cfg, limits=limits)
    raise ValueError(f"unknown engine {name!r} (choose from {', '.join(ENGINES)})")
