"""Prompt assembly and tolerant response parsing."""
from __future__ import annotations

import json
import logging
import re

from ..errors import Diagnostic, NoParsableArray, SpecError
from ..lang import ast as A
from ..lang.check import parse_clause
from ..lang.normalize import normalize_clause
from ..lang.printer import to_text
from .base import ProposalBatch, ProposalContext, ProposalItem

log = logging.getLogger(__name__)

EMPTY = "(none)"

HEADER = (
    "Generate TLA+ inductive invariant clauses that exclude the counterexample states "
    "while capturing structural relationships in the specification."
)

INSTRUCTIONS = (
    "Complete, self-contained TLA+ expressions; no primed variables or temporal operators.",
    "Use nested quantifiers for dependent domains, reusing the provided quantifier templates.",
    "Generalize from counterexamples; prefer structural clauses over witness-specific exclusions.",
    "Use only identifiers and operators present in the specification or counterexample states.",
    "Do not repeat existing clauses or return any clause listed under known false.",
    "Use known true clauses as structural guidance only; try strengthening them into tighter variants.",
    "For each known false entry, try loosening the clause by folding the violating state "
    "into its quantified or value space.",
)

OUTPUT = 'JSON array of 10-15 clauses:\n[{"clause_name": "...", "clause": "TLA+ expr"}]'


def _section(label: str, lines) -> str:
    lines = [l for l in lines]
    body = "\n".join(lines) if lines else EMPTY
    return f"{label}:\n{body}"


def build_prompt(ctx: ProposalContext) -> str:
    parts = [HEADER, ""]
    parts += [f"{i}. {t}" for i, t in enumerate(INSTRUCTIONS, 1)]
    parts.append("")
    parts.append(_section("Specification", [ctx.spec_text.rstrip("\n")]))
    parts.append(_section("Counterexample states", ctx.bad_states))
    parts.append(_section("Quantifier templates", ctx.templates))
    parts.append(_section("Existing clauses", ctx.existing_clauses))
    parts.append(_section("Known true on finite reachable states", ctx.known_true))
    parts.append(_section("Known false on finite reachable states",
                          [f"{t}    (falsified by {w})" for t, w in ctx.known_false]))
    parts.append("Output:\n" + OUTPUT)
    return "\n".join(parts) + "\n"


_FENCE = re.compile(r"```[a-zA-Z]*\n?")


def _first_array(raw: str):
    """First JSON array of objects in ``raw``, tolerating prose and code fences."""
    text = _FENCE.sub("", raw)
    dec = json.JSONDecoder()
    for m in re.finditer(r"\[", text):
        try:
            val, _ = dec.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(val, list) and (not val or any(isinstance(v, dict) for v in val)):
            return val
    return None


def _slug(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]+", "_", name.strip()).strip("_")
    return s or "clause"


def parse_response(raw: str, spec, strict: bool = False, instance=None) -> ProposalBatch:
    """Extract, parse, normalize and deduplicate proposed clauses.

    Malformed entries are dropped with a diagnostic. With ``strict`` a response
    without any JSON array raises NoParsableArray; otherwise the batch is empty.
    Given ``instance``, concrete element names in clauses resolve to literals.
    """
    batch = ProposalBatch(raw=raw)
    arr = _first_array(raw or "")
    if arr is None:
        d = Diagnostic("NoParsableArray", "response contains no JSON array of clause objects")
        if strict:
            raise NoParsableArray(str(d))
        batch.diagnostics.append(d)
        return batch
    seen_forms, seen_names = set(), set()
    for k, entry in enumerate(arr):
        where = f"entry {k}"
        if not isinstance(entry, dict) or not isinstance(entry.get("clause"), str):
            batch.diagnostics.append(Diagnostic("MalformedEntry", f"{where}: missing string 'clause'"))
            continue
        text = entry["clause"]
        try:
            repairs: list = []
            expr = normalize_clause(parse_clause(text, spec, instance), spec, repairs)
        except SpecError as e:
            for d in e.diagnostics:
                batch.diagnostics.append(Diagnostic(d.kind, f"{where}: {d.message}", d.line, d.col))
            continue
        for r in repairs:
            batch.diagnostics.append(Diagnostic("ScopeRepair", f"{where}: {r}"))
        form = to_text(expr)
        if form in seen_forms:
            batch.diagnostics.append(Diagnostic("Duplicate", f"{where}: duplicate of an earlier clause"))
            continue
        seen_forms.add(form)
        name = _slug(str(entry.get("clause_name") or f"clause_{k}"))
        base, n = name, 2
        while name in seen_names:
            name = f"{base}_{n}"
            n += 1
        seen_names.add(name)
        batch.items.append(ProposalItem(name, form, expr))
    return batch


def batch_to_raw(items) -> str:
    """Serialize items as a response in the requested output format."""
    return json.dumps([{"clause_name": it.name, "clause": it.text} for it in items], indent=1)


def is_closed_unprimed(expr) -> bool:
    return not A.has_primes(expr) and not A.free_bound(expr)
