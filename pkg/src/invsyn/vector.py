"""Vectorized evaluation of expressions over arrays of state codes.

Values use the digit encoding from ``lang.ground``: sets are bitmasks, maps are
mixed-radix integers, elements are indices, booleans are numpy bools. Bound
variables always hold scalar element indices, so quantifiers unroll into
element-wise reductions.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

from .lang import ast as A

CHUNK = 1 << 20


class Batch:
    """A block of state codes with lazily decoded variable digits."""

    __slots__ = ("inst", "codes", "_digits")

    def __init__(self, inst, codes):
        self.inst = inst
        self.codes = np.asarray(codes, dtype=np.int64)
        self._digits = {}

    def __len__(self):
        return len(self.codes)

    def var(self, name):
        d = self._digits.get(name)
        if d is None:
            i = self.inst.var_pos[name]
            d = (self.codes // self.inst.strides[i]) % self.inst.radix[i]
            if isinstance(self.inst.var_types[name], A.BoolType):
                d = d.astype(bool)
            self._digits[name] = d
        return d


def _pow(r, k):
    if isinstance(k, np.ndarray):
        return np.power(np.int64(r), k.astype(np.int64))
    return r ** int(k)


def _as_int(v):
    if isinstance(v, np.ndarray):
        return v.astype(np.int64)
    return int(v)


class VecEval:
    def __init__(self, instance):
        self.inst = instance
        self.spec = instance.spec
        self._cache: dict = {}
        self._actions = None

    # compilation -----------------------------------------------------------
    def compile(self, e: A.Expr, bound: dict | None = None):
        key = (e, tuple(sorted((bound or {}).items())))
        f = self._cache.get(key)
        if f is None:
            f = self._compile(e, dict(bound or {}))
            self._cache[key] = f
        return f

    def _env(self, bound):
        return A.TypeEnv(self.spec.var_types, self.spec.const_types, bound)

    def _const_digit(self, e: A.Expr):
        """Digit of a variable-free expression."""
        return self._compile(e, {})(Batch(self.inst, np.zeros(0, dtype=np.int64)), {})

    def _characterized_code(self, e: A.Expr):
        """Code of the unique state described by a conjunction of ``var = literal`` equalities, else None."""
        inst = self.inst
        eqs = e.args if isinstance(e, A.And) else (e,)
        digits: dict = {}
        keyed: dict = {}
        for q in eqs:
            if not isinstance(q, A.Eq):
                return None
            for lhs, rhs in ((q.lhs, q.rhs), (q.rhs, q.lhs)):
                if A.variables(rhs) or A.free_bound(rhs):
                    continue
                if isinstance(lhs, A.VarRef) and not lhs.primed:
                    d = int(self._const_digit(rhs))
                    if digits.setdefault(lhs.name, d) != d:
                        return None
                    break
                if (isinstance(lhs, A.Apply) and isinstance(lhs.fn, A.VarRef)
                        and isinstance(lhs.arg, A.ElemLit)):
                    t = inst.var_types[lhs.fn.name]
                    k = inst.index[t.key][lhs.arg.name]
                    d = int(self._const_digit(rhs))
                    if keyed.setdefault((lhs.fn.name, k), d) != d:
                        return None
                    break
            else:
                return None
        for name, t in inst.var_types.items():
            if name in digits or not isinstance(t, A.MapType):
                continue
            n = inst.sort_size(t.key)
            if all((name, k) in keyed for k in range(n)):
                r = inst.domain_size(t.value)
                digits[name] = sum(keyed[(name, k)] * r ** k for k in range(n))
        if set(digits) != set(inst.var_names):
            return None
        return sum(digits[n] * s for n, s in zip(inst.var_names, inst.strides))

    def _compile(self, e: A.Expr, bound: dict):
        inst = self.inst
        if isinstance(e, A.BoolLit):
            v = bool(e.value)
            return lambda b, env: v
        if isinstance(e, A.VarRef):
            if e.primed:
                raise ValueError("primed variables cannot be evaluated on a single state")
            n = e.name
            return lambda b, env: b.var(n)
        if isinstance(e, A.ConstRef):
            t = self.spec.const_types[e.name]
            v = inst.to_digit(t, inst.constants[e.name])
            v = bool(v) if isinstance(t, A.BoolType) else v
            return lambda b, env: v
        if isinstance(e, A.BoundRef):
            n = e.name
            return lambda b, env: env[n]
        if isinstance(e, A.ElemLit):
            v = inst.index[e.sort][e.name]
            return lambda b, env: v
        if isinstance(e, A.SortSet):
            v = (1 << inst.sort_size(e.sort)) - 1
            return lambda b, env: v
        if isinstance(e, A.EmptySet):
            return lambda b, env: 0
        if isinstance(e, A.SetLit):
            fs = [self._compile(x, bound) for x in e.elems]
            return lambda b, env: reduce(np.bitwise_or, [np.left_shift(1, f(b, env)) for f in fs])
        if isinstance(e, A.Not):
            code = self._characterized_code(e.arg)
            if code is not None:
                return lambda b, env: b.codes != code
            f = self._compile(e.arg, bound)
            return lambda b, env: np.logical_not(f(b, env))
        if isinstance(e, A.And):
            excluded, rest = [], []
            for a in e.args:
                c = self._characterized_code(a.arg) if isinstance(a, A.Not) else None
                (rest.append(a) if c is None else excluded.append(c))
            fs = [self._compile(x, bound) for x in rest]
            if len(excluded) > 1:
                ex = np.array(sorted(excluded), dtype=np.int64)
                fs.append(lambda b, env: ~np.isin(b.codes, ex))
            elif excluded:
                c0 = excluded[0]
                fs.append(lambda b, env: b.codes != c0)
            return lambda b, env: reduce(np.logical_and, [f(b, env) for f in fs])
        if isinstance(e, A.Or):
            fs = [self._compile(x, bound) for x in e.args]
            return lambda b, env: reduce(np.logical_or, [f(b, env) for f in fs])
        if isinstance(e, A.Implies):
            f, g = self._compile(e.lhs, bound), self._compile(e.rhs, bound)
            return lambda b, env: np.logical_or(np.logical_not(f(b, env)), g(b, env))
        if isinstance(e, (A.Iff, A.Eq)):
            f, g = self._compile(e.lhs, bound), self._compile(e.rhs, bound)
            return lambda b, env: np.equal(f(b, env), g(b, env))
        if isinstance(e, A.In):
            f, g = self._compile(e.elem, bound), self._compile(e.set, bound)
            return lambda b, env: np.bitwise_and(np.right_shift(g(b, env), f(b, env)), 1) != 0
        if isinstance(e, A.Subset):
            f, g = self._compile(e.lhs, bound), self._compile(e.rhs, bound)
            return lambda b, env: np.bitwise_and(f(b, env), np.invert(g(b, env))) == 0
        if isinstance(e, A.Union_):
            fs = [self._compile(x, bound) for x in e.args]
            return lambda b, env: reduce(np.bitwise_or, [f(b, env) for f in fs])
        if isinstance(e, A.Inter):
            fs = [self._compile(x, bound) for x in e.args]
            return lambda b, env: reduce(np.bitwise_and, [f(b, env) for f in fs])
        if isinstance(e, A.Diff):
            f, g = self._compile(e.lhs, bound), self._compile(e.rhs, bound)
            return lambda b, env: np.bitwise_and(f(b, env), np.invert(g(b, env)))
        if isinstance(e, A.Quant):
            body = self._compile(e.body, {**bound, e.var: e.sort})
            n = inst.sort_size(e.sort)
            var = e.var
            op = np.logical_and if isinstance(e, A.Forall) else np.logical_or

            def quant(b, env):
                inner = dict(env)
                vals = []
                for i in range(n):
                    inner[var] = i
                    vals.append(body(b, inner))
                return reduce(op, vals)
            return quant
        if isinstance(e, A.Apply):
            t = A.type_of(e.fn, self._env(bound))
            r = inst.domain_size(t.value)
            is_bool = isinstance(t.value, A.BoolType)
            f, g = self._compile(e.fn, bound), self._compile(e.arg, bound)

            def app(b, env):
                v = (f(b, env) // _pow(r, g(b, env))) % r
                return v != 0 if is_bool else v
            return app
        if isinstance(e, A.Except):
            t = A.type_of(e.fn, self._env(bound))
            r = inst.domain_size(t.value)
            f, g, h = (self._compile(x, bound) for x in (e.fn, e.arg, e.value))

            def upd(b, env):
                m = f(b, env)
                w = _pow(r, g(b, env))
                old = (m // w) % r
                return m + (_as_int(h(b, env)) - old) * w
            return upd
        raise TypeError(f"cannot evaluate {e!r}")

    # evaluation ------------------------------------------------------------
    def truth(self, expr: A.Expr, codes, env: dict | None = None, bound: dict | None = None) -> np.ndarray:
        b = codes if isinstance(codes, Batch) else Batch(self.inst, codes)
        v = self.compile(expr, bound)(b, env or {})
        return np.broadcast_to(np.asarray(v, dtype=bool), (len(b),)).copy()

    def value(self, expr: A.Expr, codes, env: dict | None = None, bound: dict | None = None) -> np.ndarray:
        b = codes if isinstance(codes, Batch) else Batch(self.inst, codes)
        v = self.compile(expr, bound)(b, env or {})
        return np.broadcast_to(np.asarray(v), (len(b),)).copy()

    def scan(self, expr: A.Expr, start: int = 0, stop: int | None = None):
        """Codes in ``[start, stop)`` satisfying ``expr``, ascending."""
        stop = self.inst.universe_size if stop is None else stop
        out = []
        for lo in range(start, stop, CHUNK):
            codes = np.arange(lo, min(lo + CHUNK, stop), dtype=np.int64)
            out.append(codes[self.truth(expr, codes)])
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    # transitions -----------------------------------------------------------
    @property
    def action_bindings(self) -> list:
        """[(action, binding names, binding indices)] in canonical step order."""
        if self._actions is None:
            acts = []
            for act in self.spec.actions:
                for binding in self.inst.bindings[act.name]:
                    idx = {p: self.inst.index[s][x] for (p, s), x in zip(act.params, binding)}
                    acts.append((act, binding, idx))
            self._actions = acts
        return self._actions

    def step_codes(self, codes):
        """All steps from ``codes``: (source positions, step labels, successor codes).

        Sorted by source position, then label (action declaration order, then
        binding order).
        """
        b = codes if isinstance(codes, Batch) else Batch(self.inst, codes)
        inst = self.inst
        srcs, labels, succs = [], [], []
        for li, (act, _, env) in enumerate(self.action_bindings):
            sorts = dict(act.params)
            g = self.truth(act.guard, b, env, sorts)
            pos = np.nonzero(g)[0]
            if not len(pos):
                continue
            sub = Batch(inst, b.codes[pos])
            new = sub.codes.copy()
            for var, u in act.updates:
                if u is None:
                    continue
                i = inst.var_pos[var]
                nv = _as_int(self.value(u, sub, env, sorts))
                new += (nv - sub.var(var).astype(np.int64)) * inst.strides[i]
            srcs.append(pos)
            labels.append(np.full(len(pos), li, dtype=np.int32))
            succs.append(new)
        if not srcs:
            z = np.zeros(0, dtype=np.int64)
            return z, np.zeros(0, dtype=np.int32), z
        src = np.concatenate(srcs)
        lab = np.concatenate(labels)
        suc = np.concatenate(succs)
        order = np.lexsort((lab, src))
        return src[order], lab[order], suc[order]
