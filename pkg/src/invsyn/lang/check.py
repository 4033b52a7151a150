"""Name resolution and type checking: raw syntax tree -> resolved ``Expr``."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import (
    Diagnostic,
    PrimedVariableError,
    SpecError,
    SpecNameError,
    SpecSyntaxError,
    SpecTypeError,
    UnrepairableScope,
    spec_error,
)
from . import ast as A
from .syntax import Raw, RawType, parse_raw_expr, parse_raw_spec


@dataclass(frozen=True)
class Action:
    name: str
    params: tuple  # ((name, sort), ...)
    guard: A.Expr
    updates: tuple  # ((var, Expr | None), ...) in variable order; None = UNCHANGED


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    sorts: tuple
    constants: tuple  # ((name, Type), ...)
    variables: tuple  # ((name, Type), ...) in declaration order
    init: A.Expr
    actions: tuple
    safety: A.Expr
    source: str = field(default="", compare=False)

    @property
    def var_types(self) -> dict:
        return dict(self.variables)

    @property
    def const_types(self) -> dict:
        return dict(self.constants)

    @property
    def var_names(self) -> list[str]:
        """Variable names in canonical (lexicographic) order."""
        return sorted(n for n, _ in self.variables)

    @property
    def global_names(self) -> set[str]:
        return set(self.sorts) | {n for n, _ in self.constants} | {n for n, _ in self.variables}

    @property
    def safety_conjuncts(self) -> list[A.Expr]:
        return A.conjuncts(self.safety)

    def type_env(self) -> A.TypeEnv:
        return A.TypeEnv(self.var_types, self.const_types)

    def action(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)


class _Checker:
    """Resolves identifiers against a scope chain and infers types."""

    def __init__(self, sorts, const_types, var_types, elements=None, allow_primes=False):
        self.sorts = list(sorts)
        self.const_types = const_types
        self.var_types = var_types
        self.elements = elements or {}  # element name -> sort
        self.allow_primes = allow_primes
        self.errors: list[Diagnostic] = []

    def err(self, cls, msg, pos):
        raise cls.at(msg, pos)

    def lookup(self, name, scope, pos) -> tuple[A.Expr, A.Type]:
        if name in scope:
            s = scope[name]
            return A.BoundRef(name), A.ElemType(s)
        if name in self.var_types:
            return A.VarRef(name), self.var_types[name]
        if name in self.const_types:
            return A.ConstRef(name), self.const_types[name]
        if name in self.sorts:
            return A.SortSet(name), A.SetType(name)
        if name in self.elements:
            s = self.elements[name]
            return A.ElemLit(s, name), A.ElemType(s)
        self.err(SpecNameError, f"unresolved identifier {name!r}", pos)

    def bool_(self, r: Raw, scope) -> A.Expr:
        e, t = self.check(r, scope)
        if t != A.BOOL:
            self.err(SpecTypeError, f"expected BOOL, inferred {t}", r.pos)
        return e

    def set_(self, r: Raw, scope, expected=None) -> tuple[A.Expr, A.SetType]:
        e, t = self.check(r, scope, expected)
        if not isinstance(t, A.SetType):
            exp = expected or "a set"
            self.err(SpecTypeError, f"expected {exp}, inferred {t}", r.pos)
        if expected is not None and t != expected:
            self.err(SpecTypeError, f"expected {expected}, inferred {t}", r.pos)
        return e, t

    def against(self, r: Raw, scope, expected) -> A.Expr:
        e, t = self.check(r, scope, expected)
        if t != expected:
            self.err(SpecTypeError, f"expected {expected}, inferred {t}", r.pos)
        return e

    @staticmethod
    def _is_empty(r: Raw) -> bool:
        return r.op == "setlit" and not r.args

    def pair(self, a: Raw, b: Raw, scope):
        """Check two operands that must share a type; empty-set literals take the other side's type."""
        if self._is_empty(a) and not self._is_empty(b):
            eb, tb = self.check(b, scope)
            return self.against(a, scope, tb), eb, tb
        ea, ta = self.check(a, scope)
        return ea, self.against(b, scope, ta), ta

    def check(self, r: Raw, scope, expected=None) -> tuple[A.Expr, A.Type]:
        op = r.op
        if op == "bool":
            return A.BoolLit(bool(r.value)), A.BOOL
        if op == "name":
            return self.lookup(r.value, scope, r.pos)
        if op == "prime":
            inner = r.args[0]
            if inner.op != "name" or inner.value not in self.var_types or inner.value in scope:
                self.err(SpecTypeError, "prime applies only to state variables", r.pos)
            if not self.allow_primes:
                self.err(PrimedVariableError, f"primed variable {inner.value}' not allowed here", r.pos)
            return A.VarRef(inner.value, True), self.var_types[inner.value]
        if op in ("/\\", "\\/", "=>", "<=>"):
            a, b = (self.bool_(x, scope) for x in r.args)
            if op == "/\\":
                return A.And((a, b)), A.BOOL
            if op == "\\/":
                return A.Or((a, b)), A.BOOL
            if op == "=>":
                return A.Implies(a, b), A.BOOL
            return A.Iff(a, b), A.BOOL
        if op == "~":
            return A.Not(self.bool_(r.args[0], scope)), A.BOOL
        if op in ("=", "#"):
            a, b, _ = self.pair(*r.args, scope)
            e = A.Eq(a, b)
            return (e if op == "=" else A.Not(e)), A.BOOL
        if op in ("\\in", "\\notin"):
            if self._is_empty(r.args[1]):
                el, et = self.check(r.args[0], scope)
                if not isinstance(et, A.ElemType):
                    self.err(SpecTypeError, f"membership needs an element, inferred {et}", r.args[0].pos)
                s, st = self.set_(r.args[1], scope, A.SetType(et.sort))
            else:
                s, st = self.set_(r.args[1], scope)
                el = self.against(r.args[0], scope, A.ElemType(st.sort))
            e = A.In(el, s)
            return (e if op == "\\in" else A.Not(e)), A.BOOL
        if op == "\\subseteq":
            a, b, t = self.pair(*r.args, scope)
            if not isinstance(t, A.SetType):
                self.err(SpecTypeError, f"\\subseteq needs sets, inferred {t}", r.pos)
            return A.Subset(a, b), A.BOOL
        if op in ("\\cup", "\\cap", "\\"):
            if self._is_empty(r.args[0]) and not self._is_empty(r.args[1]):
                b, t = self.set_(r.args[1], scope, expected if isinstance(expected, A.SetType) else None)
                a, _ = self.set_(r.args[0], scope, t)
            else:
                a, t = self.set_(r.args[0], scope, expected if isinstance(expected, A.SetType) else None)
                b, _ = self.set_(r.args[1], scope, t)
            if op == "\\cup":
                return A.Union_((a, b)), t
            if op == "\\cap":
                return A.Inter((a, b)), t
            return A.Diff(a, b), t
        if op == "setlit":
            if not r.args:
                if not isinstance(expected, A.SetType):
                    self.err(SpecTypeError, "cannot infer the element sort of {}", r.pos)
                return A.EmptySet(expected.sort), expected
            want = A.ElemType(expected.sort) if isinstance(expected, A.SetType) else None
            first, t = self.check(r.args[0], scope, want)
            if not isinstance(t, A.ElemType):
                self.err(SpecTypeError, f"set literal elements must be elements, inferred {t}", r.args[0].pos)
            rest = [self.against(x, scope, t) for x in r.args[1:]]
            return A.SetLit(t.sort, (first, *rest)), A.SetType(t.sort)
        if op == "apply":
            fn, ft = self.check(r.args[0], scope)
            if not isinstance(ft, A.MapType):
                self.err(SpecTypeError, f"only maps can be applied, inferred {ft}", r.pos)
            arg = self.against(r.args[1], scope, A.ElemType(ft.key))
            return A.Apply(fn, arg), ft.value
        if op == "except":
            fn, ft = self.check(r.args[0], scope)
            if not isinstance(ft, A.MapType):
                self.err(SpecTypeError, f"EXCEPT needs a map, inferred {ft}", r.pos)
            arg = self.against(r.args[1], scope, A.ElemType(ft.key))
            val = self.against(r.args[2], scope, ft.value)
            return A.Except(fn, arg, val), ft
        if op in ("forall", "exists"):
            dom_raw, body_raw = r.args
            name = r.value
            if dom_raw.op == "name" and dom_raw.value in self.sorts and dom_raw.value not in scope:
                sort, guard = dom_raw.value, None
            else:
                dom, dt = self.set_(dom_raw, scope)
                sort, guard = dt.sort, dom
            inner = dict(scope)
            inner[name] = sort
            body = self.bool_(body_raw, inner)
            if guard is not None:
                mem = A.In(A.BoundRef(name), guard)
                body = A.Implies(mem, body) if op == "forall" else A.And((mem, body))
            cls = A.Forall if op == "forall" else A.Exists
            return cls(name, sort, body), A.BOOL
        self.err(SpecSyntaxError, f"unknown construct {op}", r.pos)


def _resolve_type(rt: RawType, sorts, where) -> A.Type:
    if rt.kind == "bool":
        return A.BOOL
    if rt.sort not in sorts:
        raise SpecNameError.at(f"unknown sort {rt.sort!r} in type of {where}", rt.pos)
    if rt.kind == "elem":
        return A.ElemType(rt.sort)
    if rt.kind == "set":
        return A.SetType(rt.sort)
    cod = _resolve_type(rt.codomain, sorts, where)
    if not isinstance(cod, (A.BoolType, A.ElemType)):
        raise SpecTypeError.at(f"map codomain must be BOOL or a sort, got {cod}", rt.codomain.pos)
    return A.MapType(rt.sort, cod)


def parse_spec(text: str) -> ProtocolSpec:
    """Parse and type-check protocol source. Raises ``SpecError`` with diagnostics."""
    if not isinstance(text, str):
        raise SpecSyntaxError.at("source must be text", (1, 1))
    raw = parse_raw_spec(text)
    diags: list[Diagnostic] = []

    def guard(fn):
        try:
            return fn()
        except SpecError as exc:
            diags.extend(exc.diagnostics)
            return None

    seen: dict[str, str] = {}
    sorts = []
    for name, pos in raw.sorts:
        if name in seen:
            diags.append(Diagnostic("NameError", f"duplicate name {name!r} (already a {seen[name]})", *pos))
            continue
        seen[name] = "sort"
        sorts.append(name)
    consts, vars_ = {}, {}
    for kind, items, target in (("constant", raw.constants, consts), ("variable", raw.variables, vars_)):
        for name, rt, pos in items:
            if name in seen:
                diags.append(Diagnostic("NameError", f"duplicate name {name!r} (already a {seen[name]})", *pos))
                continue
            seen[name] = kind
            t = guard(lambda: _resolve_type(rt, sorts, name))
            if t is not None:
                target[name] = t
    if diags:
        raise spec_error(diags)

    chk = _Checker(sorts, consts, vars_)

    def conj(raws):
        parts = [guard(lambda r=r: chk.bool_(r, {})) for r in raws]
        parts = [p for p in parts if p is not None]
        return A.mk_and(parts)

    init = conj(raw.init)
    safety = conj(raw.safety)

    actions = []
    names = set()
    for ra in raw.actions:
        if ra.name in names:
            diags.append(Diagnostic("NameError", f"duplicate action {ra.name!r}", *ra.pos))
            continue
        names.add(ra.name)
        scope = {}
        ok = True
        for pname, psort, ppos in ra.params:
            if psort not in sorts:
                diags.append(Diagnostic("NameError", f"unknown sort {psort!r} for parameter {pname}", *ppos))
                ok = False
            elif pname in scope:
                diags.append(Diagnostic("NameError", f"duplicate parameter {pname!r}", *ppos))
                ok = False
            scope[pname] = psort
        if not ok:
            continue
        guards = [guard(lambda r=r: chk.bool_(r, scope)) for r in ra.requires]
        upd: dict[str, A.Expr | None] = {}
        for var, rexpr, pos in ra.updates:
            if var not in vars_:
                diags.append(Diagnostic("NameError", f"action {ra.name} updates unknown variable {var!r}", *pos))
                continue
            if var in upd:
                diags.append(Diagnostic(
                    "TypeError", f"action {ra.name} updates variable {var!r} more than once", *pos))
                continue
            if rexpr is None:
                upd[var] = None
            else:
                e = guard(lambda rexpr=rexpr, var=var: chk.against(rexpr, scope, vars_[var]))
                upd[var] = e if e is not None else A.VarRef(var)
        missing = [v for v in vars_ if v not in upd]
        for v in missing:
            diags.append(Diagnostic(
                "TypeError", f"action {ra.name} neither updates nor marks UNCHANGED variable {v!r}", *ra.pos))
        ordered = tuple((v, upd.get(v)) for v, _ in raw_var_order(raw) if v in vars_)
        actions.append(Action(
            ra.name,
            tuple((p, s) for p, s, _ in ra.params),
            A.mk_and([g for g in guards if g is not None]),
            ordered,
        ))
    if diags:
        raise spec_error(diags)
    return ProtocolSpec(
        name=raw.name,
        sorts=tuple(sorts),
        constants=tuple(consts.items()),
        variables=tuple(vars_.items()),
        init=init,
        actions=tuple(actions),
        safety=safety,
        source=text,
    )


def raw_var_order(raw):
    return [(n, t) for n, t, _ in raw.variables]


def _binders_colliding(r: Raw, globals_) -> bool:
    if r.op in ("forall", "exists") and r.value in globals_:
        return True
    return any(isinstance(a, Raw) and _binders_colliding(a, globals_) for a in r.args)


def check_expr(raw: Raw, spec: ProtocolSpec, *, elements=None, scope=None,
               allow_primes=False) -> A.Expr:
    chk = _Checker(spec.sorts, spec.const_types, spec.var_types, elements, allow_primes)
    try:
        return chk.bool_(raw, dict(scope or {}))
    except (SpecTypeError, SpecNameError) as exc:
        if _binders_colliding(raw, spec.global_names):
            raise UnrepairableScope(
                [Diagnostic("UnrepairableScope",
                            "a quantifier rebinds a spec name and the body is ill-typed "
                            "under either reading", d.line, d.col) for d in exc.diagnostics]
            ) from exc
        raise


def parse_clause(text: str, spec: ProtocolSpec, instance=None) -> A.Expr:
    """Parse a closed, unprimed, boolean clause.

    With ``instance`` given, element names of its sorts resolve to element literals.
    """
    if not isinstance(text, str):
        raise SpecSyntaxError.at("clause must be text", (1, 1))
    raw = parse_raw_expr(text)
    elements = None
    if instance is not None:
        elements = {e: s for s, es in instance.elements.items() for e in es}
    return check_expr(raw, spec, elements=elements)


def parse_expr_in(text: str, spec: ProtocolSpec, scope: dict, instance=None, allow_primes=False):
    raw = parse_raw_expr(text)
    elements = None
    if instance is not None:
        elements = {e: s for s, es in instance.elements.items() for e in es}
    chk = _Checker(spec.sorts, spec.const_types, spec.var_types, elements, allow_primes)
    return chk.check(raw, dict(scope))
