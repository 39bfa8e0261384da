"""Proof-based hypermedia API composition: an N3-subset toolchain with a
proof-producing rule engine, description handling, the pragmatic proof
execution loop, simulators, a benchmark harness, and description
skeleton generation."""

__all__ = [
    "n3", "reason", "restdesc", "agent", "simulator",
    "benchmark", "report", "descgen", "cli",
]

__version__ = "0.1.0"
