"""Clause canonicalization and quantifier-template extraction."""
from __future__ import annotations

from dataclasses import dataclass

from . import ast as A
from .printer import to_text


def _flatten(e: A.Expr) -> A.Expr:
    e = A.rebuild(e, _flatten)
    if isinstance(e, A.COMMUTATIVE):
        cls = type(e)
        args = []
        for a in e.args:
            args.extend(a.args if isinstance(a, cls) else (a,))
        return cls(tuple(args))
    return e


def _sort_operands(e: A.Expr, scope: tuple = ()) -> A.Expr:
    if isinstance(e, A.Quant):
        return type(e)(e.var, e.sort, _sort_operands(e.body, scope + (e.var,)))
    e = A.rebuild(e, lambda c: _sort_operands(c, scope))
    if isinstance(e, A.COMMUTATIVE):
        uniq = {}
        for a in e.args:
            uniq.setdefault(A.canon_key(a, scope), a)
        args = tuple(uniq[k] for k in sorted(uniq))
        return args[0] if len(args) == 1 else type(e)(args)
    if isinstance(e, A.SYMMETRIC):
        if A.canon_key(e.rhs, scope) < A.canon_key(e.lhs, scope):
            return type(e)(e.rhs, e.lhs)
    if isinstance(e, A.SetLit):
        uniq = {}
        for a in e.elems:
            uniq.setdefault(A.canon_key(a, scope), a)
        return A.SetLit(e.sort, tuple(uniq[k] for k in sorted(uniq)))
    return e


def _rename(e: A.Expr, avoid: set, counter: list, mapping: dict) -> A.Expr:
    if isinstance(e, A.BoundRef):
        return A.BoundRef(mapping.get(e.name, e.name))
    if isinstance(e, A.Quant):
        while True:
            counter[0] += 1
            fresh = f"v{counter[0]}"
            if fresh not in avoid:
                break
        inner = dict(mapping)
        inner[e.var] = fresh
        return type(e)(fresh, e.sort, _rename(e.body, avoid, counter, inner))
    return A.rebuild(e, lambda c: _rename(c, avoid, counter, mapping))


def normalize_clause(expr: A.Expr, spec, repairs: list | None = None) -> A.Expr:
    """Canonical form: flattened and sorted commutative operands, binders renamed v1, v2, ...

    Binders that reuse a constant, variable or sort name are renamed; each
    such repair is appended to ``repairs`` when a list is supplied.
    """
    names = spec.global_names
    if repairs is not None:
        for n in A.walk(expr):
            if isinstance(n, A.Quant) and n.var in names:
                repairs.append(f"quantifier variable {n.var!r} shadows a spec name; renamed")
    # dedup can expose new nested junctions, so iterate to a fixpoint
    e, prev = expr, None
    while e != prev:
        prev, e = e, _sort_operands(_flatten(e))
    # free bound refs (action parameters) must keep their names
    avoid = set(names) | A.free_bound(e)
    # element literals print bare, so a binder must not take their name
    avoid |= {n.name for n in A.walk(e) if isinstance(n, A.ElemLit)}
    return _rename(e, avoid, [0], {})


def canonical_text(expr: A.Expr, spec) -> str:
    return to_text(normalize_clause(expr, spec))


@dataclass(frozen=True)
class QuantifierTemplate:
    prefix: tuple  # (("forall" | "exists", sort), ...)

    def render(self) -> str:
        parts = []
        for i, (kind, sort) in enumerate(self.prefix, 1):
            q = "\\A" if kind == "forall" else "\\E"
            parts.append(f"{q} v{i} \\in {sort} :")
        return " ".join(parts) + " <matrix>"

    def __str__(self):
        return self.render()


def _prefixes(e: A.Expr, out: list):
    if isinstance(e, A.Quant):
        chain = []
        cur = e
        while isinstance(cur, A.Quant):
            chain.append(("forall" if isinstance(cur, A.Forall) else "exists", cur.sort))
            cur = cur.body
        out.append(tuple(chain))
        _prefixes(cur, out)
        return
    for c in e.children():
        _prefixes(c, out)


def extract_quantifier_templates(spec) -> list[QuantifierTemplate]:
    """Distinct quantifier prefixes of init, guards, updates and safety, in first-occurrence order."""
    exprs = [spec.init]
    for act in spec.actions:
        exprs.append(act.guard)
        exprs.extend(u for _, u in act.updates if u is not None)
    exprs.append(spec.safety)
    found: list = []
    for e in exprs:
        _prefixes(e, found)
    seen, out = set(), []
    for p in found:
        if p not in seen:
            seen.add(p)
            out.append(QuantifierTemplate(p))
    return out
