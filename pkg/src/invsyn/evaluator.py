"""Concrete-state semantics: expression evaluation, initial states, successors.

States are tuples of Python values in the instance's variable order
(``instance.var_names``): ``bool`` for BOOL, ``str`` for elements,
``frozenset`` for sets and a tuple indexed by key position for maps.

This is the straightforward reference semantics. The witness engine uses a
separate vectorized compiler (``vector.py``); tests cross-check the two.
"""
from __future__ import annotations

import itertools
import logging
from typing import Callable, NamedTuple, Optional

from .lang import ast as A

log = logging.getLogger(__name__)

State = tuple


class Step(NamedTuple):
    action: str
    binding: tuple
    state: State

    @property
    def label(self) -> str:
        return action_label(self.action, self.binding)


def action_label(name: str, binding: tuple) -> str:
    return f"{name}({', '.join(binding)})" if binding else name


class _Compiler:
    def __init__(self, instance):
        self.inst = instance
        self.env = instance.spec.type_env()

    def compile(self, e: A.Expr, bound: dict) -> Callable:
        inst = self.inst
        if isinstance(e, A.BoolLit):
            v = e.value
            return lambda s, b: v
        if isinstance(e, A.VarRef):
            if e.primed:
                raise ValueError("primed variables cannot be evaluated on a single state")
            i = inst.var_pos[e.name]
            return lambda s, b: s[i]
        if isinstance(e, A.ConstRef):
            v = inst.constants[e.name]
            return lambda s, b: v
        if isinstance(e, A.BoundRef):
            n = e.name
            return lambda s, b: b[n]
        if isinstance(e, A.ElemLit):
            v = e.name
            return lambda s, b: v
        if isinstance(e, A.SortSet):
            v = frozenset(inst.elements[e.sort])
            return lambda s, b: v
        if isinstance(e, A.EmptySet):
            v = frozenset()
            return lambda s, b: v
        if isinstance(e, A.SetLit):
            fs = [self.compile(x, bound) for x in e.elems]
            return lambda s, b: frozenset(f(s, b) for f in fs)
        if isinstance(e, A.Not):
            f = self.compile(e.arg, bound)
            return lambda s, b: not f(s, b)
        if isinstance(e, A.And):
            fs = [self.compile(x, bound) for x in e.args]
            return lambda s, b: all(f(s, b) for f in fs)
        if isinstance(e, A.Or):
            fs = [self.compile(x, bound) for x in e.args]
            return lambda s, b: any(f(s, b) for f in fs)
        if isinstance(e, A.Implies):
            f, g = self.compile(e.lhs, bound), self.compile(e.rhs, bound)
            return lambda s, b: (not f(s, b)) or g(s, b)
        if isinstance(e, A.Iff):
            f, g = self.compile(e.lhs, bound), self.compile(e.rhs, bound)
            return lambda s, b: f(s, b) == g(s, b)
        if isinstance(e, A.Eq):
            f, g = self.compile(e.lhs, bound), self.compile(e.rhs, bound)
            return lambda s, b: f(s, b) == g(s, b)
        if isinstance(e, A.In):
            f, g = self.compile(e.elem, bound), self.compile(e.set, bound)
            return lambda s, b: f(s, b) in g(s, b)
        if isinstance(e, A.Subset):
            f, g = self.compile(e.lhs, bound), self.compile(e.rhs, bound)
            return lambda s, b: f(s, b) <= g(s, b)
        if isinstance(e, A.Union_):
            fs = [self.compile(x, bound) for x in e.args]
            return lambda s, b: frozenset().union(*(f(s, b) for f in fs))
        if isinstance(e, A.Inter):
            fs = [self.compile(x, bound) for x in e.args]

            def inter(s, b):
                out = fs[0](s, b)
                for f in fs[1:]:
                    out = out & f(s, b)
                return out
            return inter
        if isinstance(e, A.Diff):
            f, g = self.compile(e.lhs, bound), self.compile(e.rhs, bound)
            return lambda s, b: f(s, b) - g(s, b)
        if isinstance(e, A.Quant):
            body = self.compile(e.body, {**bound, e.var: e.sort})
            elems = inst.elements[e.sort]
            var = e.var
            agg = all if isinstance(e, A.Forall) else any

            def quant(s, b):
                inner = dict(b)

                def gen():
                    for x in elems:
                        inner[var] = x
                        yield body(s, inner)
                return agg(gen())
            return quant
        if isinstance(e, A.Apply):
            fn_t = A.type_of(e.fn, A.TypeEnv(self.env.var_types, self.env.const_types, bound))
            idx = inst.index[fn_t.key]
            f, g = self.compile(e.fn, bound), self.compile(e.arg, bound)
            return lambda s, b: f(s, b)[idx[g(s, b)]]
        if isinstance(e, A.Except):
            fn_t = A.type_of(e.fn, A.TypeEnv(self.env.var_types, self.env.const_types, bound))
            idx = inst.index[fn_t.key]
            f, g, h = (self.compile(x, bound) for x in (e.fn, e.arg, e.value))

            def upd(s, b):
                m = list(f(s, b))
                m[idx[g(s, b)]] = h(s, b)
                return tuple(m)
            return upd
        raise TypeError(f"cannot evaluate {e!r}")


def compile_expr(expr: A.Expr, instance, bound_sorts: Optional[dict] = None) -> Callable:
    """Compile to ``f(state, bindings) -> value``; cached per instance."""
    cache = instance.__dict__.setdefault("_scalar_cache", {})
    key = (expr, tuple(sorted((bound_sorts or {}).items())))
    f = cache.get(key)
    if f is None:
        f = _Compiler(instance).compile(expr, dict(bound_sorts or {}))
        cache[key] = f
    return f


def eval_expr(expr: A.Expr, state: State, instance, bindings: Optional[dict] = None):
    """Value of ``expr`` on ``state``. ``bindings`` maps free bound names to elements."""
    bindings = bindings or {}
    sorts = {}
    for n, v in bindings.items():
        for s, es in instance.elements.items():
            if v in instance.index[s]:
                sorts[n] = s
                break
    return compile_expr(expr, instance, sorts)(state, bindings)


def holds(expr: A.Expr, state: State, instance) -> bool:
    return bool(compile_expr(expr, instance)(state, {}))


class _CompiledAction:
    def __init__(self, action, instance):
        self.name = action.name
        self.params = [p for p, _ in action.params]
        sorts = dict(action.params)
        self.guard = compile_expr(action.guard, instance, sorts)
        self.updates = []
        for v in instance.var_names:
            u = dict(action.updates)[v]
            self.updates.append(None if u is None else compile_expr(u, instance, sorts))

    def apply(self, binding: tuple, pre: State) -> Optional[State]:
        b = dict(zip(self.params, binding))
        if not self.guard(pre, b):
            return None
        return tuple(v if f is None else f(pre, b) for v, f in zip(pre, self.updates))


def _compiled_actions(instance):
    acts = instance.__dict__.get("_compiled_actions")
    if acts is None:
        acts = [_CompiledAction(a, instance) for a in instance.spec.actions]
        instance.__dict__["_compiled_actions"] = acts
    return acts


def eval_action(action, binding: tuple, pre: State, instance) -> Optional[State]:
    """Successor of ``pre`` under ``action`` with parameter ``binding``, or None if disabled."""
    name = action if isinstance(action, str) else action.name
    for ca in _compiled_actions(instance):
        if ca.name == name:
            return ca.apply(tuple(binding), pre)
    raise KeyError(name)


def successors(state: State, instance) -> list[Step]:
    """All enabled (action, binding) steps from ``state``; stuttering is not included."""
    out = []
    for ca in _compiled_actions(instance):
        for binding in instance.bindings[ca.name]:
            nxt = ca.apply(binding, state)
            if nxt is not None:
                out.append(Step(ca.name, binding, nxt))
    return out


class InitReport(NamedTuple):
    states: list
    unsatisfiable: bool


def _fixed_vars(instance) -> dict:
    """Variables pinned by top-level ``var = closed-expression`` conjuncts of Init."""
    fixed = {}
    for c in A.conjuncts(instance.spec.init):
        if not isinstance(c, A.Eq):
            continue
        for lhs, rhs in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
            if isinstance(lhs, A.VarRef) and not A.variables(rhs) and not A.free_bound(rhs):
                if lhs.name not in fixed:
                    fixed[lhs.name] = compile_expr(rhs, instance)((), {})
                break
    return fixed


def init_states(instance) -> list[State]:
    """All states satisfying Init, in canonical order."""
    return init_report(instance).states


def init_report(instance) -> InitReport:
    fixed = _fixed_vars(instance)
    doms = []
    for n in instance.var_names:
        if n in fixed:
            doms.append([fixed[n]])
        else:
            doms.append(instance.domain(instance.var_types[n]))
    init = compile_expr(instance.spec.init, instance)
    states = [s for s in itertools.product(*doms) if init(s, {})]
    states.sort(key=instance.encode)
    if not states:
        log.warning("Init is unsatisfiable on this instance")
    return InitReport(states, not states)
