"""Deterministic offline proposer enumerating a fixed clause grammar."""
from __future__ import annotations

import json
import logging

import numpy as np

from ..errors import SpecError
from ..lang import ast as A
from ..lang.check import parse_clause
from ..lang.normalize import normalize_clause
from ..lang.printer import to_text
from ..vector import VecEval
from .base import ProposalBatch, ProposalContext, ProposalItem
from .prompt import batch_to_raw

log = logging.getLogger(__name__)

BATCH_CAP = 15
DEFAULT_BUDGET = 40


def _shapes(spec):
    """Yield (name, clause text) in a fixed order."""
    sets: dict = {}
    flags, elems, maps = [], [], []
    for n in spec.var_names:
        t = spec.var_types[n]
        if isinstance(t, A.SetType):
            sets.setdefault(t.sort, []).append(n)
        elif isinstance(t, A.BoolType):
            flags.append(n)
        elif isinstance(t, A.ElemType):
            elems.append((n, t.sort))
        else:
            maps.append((n, t))

    for f in flags:
        yield f"{f}_holds", f
        yield f"not_{f}", f"~{f}"

    for sort, xs in sets.items():
        for x in xs:
            yield f"{x}_empty_or_full", f"{x} = {{}} \\/ {x} = {sort}"
            yield f"{x}_at_most_one", (
                f"\\A a, b \\in {sort} : a \\in {x} /\\ b \\in {x} => a = b")
            for f in flags:
                yield f"{x}_nonempty_implies_{f}", f"{x} # {{}} => {f}"
                yield f"{x}_nonempty_implies_not_{f}", f"{x} # {{}} => ~{f}"
                yield f"{x}_not_full_implies_{f}", f"{x} # {sort} => {f}"
        for i, x in enumerate(xs):
            for y in xs[i + 1:]:
                yield f"{x}_{y}_disjoint", f"{x} \\cap {y} = {{}}"
                yield f"{x}_or_{y}_empty", f"{x} = {{}} \\/ {y} = {{}}"
        for x in xs:
            for y in xs:
                if x == y:
                    continue
                yield f"{x}_subset_{y}", f"{x} \\subseteq {y}"
                yield f"{x}_nonempty_implies_{y}_full", f"{x} # {{}} => {y} = {sort}"
                yield f"{x}_nonempty_implies_{y}_nonempty", f"{x} # {{}} => {y} # {{}}"
                yield f"{x}_nonempty_implies_{y}_empty", f"{x} # {{}} => {y} = {{}}"
                yield f"{x}_members_in_{y}", f"\\A n \\in {sort} : n \\in {x} => n \\in {y}"
                yield f"{x}_members_not_in_{y}", f"\\A n \\in {sort} : n \\in {x} => ~(n \\in {y})"
        for x in xs:
            for i, y in enumerate(xs):
                for z in xs[i + 1:]:
                    if x in (y, z):
                        continue
                    yield f"{x}_subset_{y}_{z}", f"{x} \\subseteq {y} \\cup {z}"

    for e, sort in elems:
        for x in sets.get(sort, []):
            yield f"{e}_in_{x}", f"{e} \\in {x}"

    for m, t in maps:
        key = t.key
        if isinstance(t.value, A.BoolType):
            for x in sets.get(key, []):
                yield f"{m}_true_implies_in_{x}", f"\\A n \\in {key} : {m}[n] => n \\in {x}"
                yield f"{x}_members_have_{m}", f"\\A n \\in {key} : n \\in {x} => {m}[n]"
            continue
        vsort = t.value.sort
        for y in sets.get(vsort, []):
            yield f"{m}_values_in_{y}", f"\\A n \\in {key} : {m}[n] \\in {y}"
            for x in sets.get(key, []):
                yield f"{x}_{m}_in_{y}", f"\\A n \\in {key} : n \\in {x} => {m}[n] \\in {y}"
        for x in sets.get(key, []):
            yield f"{x}_{m}_agree", (
                f"\\A a, b \\in {key} : a \\in {x} /\\ b \\in {x} => {m}[a] = {m}[b]")
        for m2, t2 in maps:
            if m2 != m and t2 == t:
                for x in sets.get(key, []):
                    yield f"{x}_{m}_eq_{m2}", f"\\A n \\in {key} : n \\in {x} => {m}[n] = {m2}[n]"


class TemplateProposer:
    """Enumerates the grammar, keeps clauses false on some bad state, ranks and caps."""

    kind = "template"

    def __init__(self, instance, budget: int = DEFAULT_BUDGET, cap: int = BATCH_CAP):
        self.inst = instance
        self.spec = instance.spec
        self.budget = budget
        self.cap = cap
        self.ve = VecEval(instance)
        self._grammar = None

    @property
    def grammar(self) -> list:
        """[(name, normalized expr, canonical text)] after dedup, in enumeration order."""
        if self._grammar is None:
            out, seen = [], set()
            for name, text in _shapes(self.spec):
                try:
                    e = normalize_clause(parse_clause(text, self.spec), self.spec)
                except SpecError as err:  # pragma: no cover - grammar bug
                    log.debug("template %s rejected: %s", name, err)
                    continue
                form = to_text(e)
                if form in seen:
                    continue
                seen.add(form)
                out.append((name, e, form))
            self._grammar = out
        return self._grammar

    def _bad_codes(self, ctx: ProposalContext):
        if ctx.bad_raw:
            raw = ctx.bad_raw
        else:
            raw = [self.inst.state_from_json(json.loads(s)) for s in ctx.bad_states]
        return np.array([s if isinstance(s, (int, np.integer)) else self.inst.encode(s) for s in raw],
                        dtype=np.int64)

    def propose(self, ctx: ProposalContext) -> ProposalBatch:
        if self.budget <= 0 or self.cap <= 0:
            return ProposalBatch()
        known = set(ctx.existing_clauses) | set(ctx.known_true) | {t for t, _ in ctx.known_false}
        bad = self._bad_codes(ctx)
        scored = []
        for k, (name, e, form) in enumerate(self.grammar):
            size = A.size(e)
            if size > self.budget or form in known:
                continue
            cover = int((~self.ve.truth(e, bad)).sum())
            if cover:
                scored.append((-cover, size, form, name, e))
        scored.sort(key=lambda r: r[:3])
        items = [ProposalItem(name, form, e) for _, _, form, name, e in scored[:self.cap]]
        return ProposalBatch(items, raw=batch_to_raw(items))
