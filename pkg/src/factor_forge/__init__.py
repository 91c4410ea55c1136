"""Sandboxed alpha-factor mining: DSL, evaluation, scoring and run archiving."""

__version__ = "0.1.0"
