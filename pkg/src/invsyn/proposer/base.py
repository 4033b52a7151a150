from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..errors import Diagnostic


@dataclass(frozen=True)
class ProposalContext:
    spec_text: str
    bad_states: tuple            # canonical JSON serializations
    templates: tuple = ()        # rendered quantifier templates
    existing_clauses: tuple = ()  # texts of clauses currently in frames
    known_true: tuple = ()       # texts
    known_false: tuple = ()      # (text, falsifying state serialization)
    # not rendered into prompts; lets offline proposers skip re-decoding
    bad_raw: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.bad_states:
            raise ValueError("a proposal context needs at least one bad state")


@dataclass(frozen=True)
class ProposalItem:
    name: str
    text: str
    expr: object = field(compare=False, default=None)


@dataclass
class ProposalBatch:
    items: list = field(default_factory=list)
    raw: str = ""
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.items)


class Proposer(Protocol):
    kind: str

    def propose(self, ctx: ProposalContext) -> ProposalBatch: ...


class NullProposer:
    """Never proposes anything; drives the aggregate-negation fallback."""

    kind = "null"

    def propose(self, ctx: ProposalContext) -> ProposalBatch:
        return ProposalBatch()


def record_observation(memory, clause, outcome: bool, witness: Optional[str] = None):
    """Append a screening outcome to a memory clause.

    ``memory`` is anything with ``get(clause_or_id)`` returning an object that has an
    ``observations`` list; ``witness`` is the serialization of a falsifying state.
    """
    entry = memory.get(clause)
    if entry is None:
        raise KeyError("clause is not in memory")
    if outcome and witness is not None:
        raise ValueError("a held observation carries no witness")
    entry.observations.append((bool(outcome), witness))
    return entry


def diag(message: str) -> Diagnostic:
    return Diagnostic("ProposalError", message)
