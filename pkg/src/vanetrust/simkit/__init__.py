"""Deterministic scenario simulator, overhead model, benchmark, and CLI."""
