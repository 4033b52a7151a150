"""Counterexample-guided inductive invariant synthesis over finite protocol instances."""
from __future__ import annotations

from .controller import (
    Clause,
    ClauseMemory,
    Controller,
    SynthConfig,
    SynthesisResult,
    minimize_invariant,
    synthesize,
)
from .explorer import ReachSet, coverage_rank, reachable, screen_clauses, trace_to
from .lang import InstanceConfig, ground, parse_clause, parse_spec
from .witness import Engine, Frame

__version__ = "0.1.0"

__all__ = [
    "Clause",
    "ClauseMemory",
    "Controller",
    "Engine",
    "Frame",
    "InstanceConfig",
    "ReachSet",
    "SynthConfig",
    "SynthesisResult",
    "coverage_rank",
    "ground",
    "minimize_invariant",
    "parse_clause",
    "parse_spec",
    "reachable",
    "screen_clauses",
    "synthesize",
    "trace_to",
]
