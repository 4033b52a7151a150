"""Resolved expression AST and the finite type universe.

Nodes are frozen dataclasses so they hash and compare structurally; the
clause memory relies on that for deduplication.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Union


@dataclass(frozen=True)
class BoolType:
    def __str__(self):
        return "BOOL"


@dataclass(frozen=True)
class ElemType:
    sort: str

    def __str__(self):
        return self.sort


@dataclass(frozen=True)
class SetType:
    sort: str

    def __str__(self):
        return f"SET {self.sort}"


@dataclass(frozen=True)
class MapType:
    key: str
    value: Union[BoolType, ElemType]

    def __str__(self):
        return f"[{self.key} -> {self.value}]"


BOOL = BoolType()
Type = Union[BoolType, ElemType, SetType, MapType]


def type_sorts(t: Type) -> list[str]:
    if isinstance(t, (ElemType, SetType)):
        return [t.sort]
    if isinstance(t, MapType):
        return [t.key] + type_sorts(t.value)
    return []


class Expr:
    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Expr):
                out.append(v)
            elif isinstance(v, tuple):
                out.extend(x for x in v if isinstance(x, Expr))
        return tuple(out)

    def __str__(self):
        from .printer import to_text

        return to_text(self)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class VarRef(Expr):
    name: str
    primed: bool = False


@dataclass(frozen=True)
class ConstRef(Expr):
    name: str


@dataclass(frozen=True)
class BoundRef(Expr):
    name: str


@dataclass(frozen=True)
class ElemLit(Expr):
    sort: str
    name: str


@dataclass(frozen=True)
class SortSet(Expr):
    sort: str


@dataclass(frozen=True)
class EmptySet(Expr):
    sort: str


@dataclass(frozen=True)
class SetLit(Expr):
    sort: str
    elems: tuple


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    args: tuple


@dataclass(frozen=True)
class Or(Expr):
    args: tuple


@dataclass(frozen=True)
class Implies(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Iff(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Eq(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class In(Expr):
    elem: Expr
    set: Expr


@dataclass(frozen=True)
class Subset(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Union_(Expr):
    args: tuple


@dataclass(frozen=True)
class Inter(Expr):
    args: tuple


@dataclass(frozen=True)
class Diff(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Forall(Expr):
    var: str
    sort: str
    body: Expr


@dataclass(frozen=True)
class Exists(Expr):
    var: str
    sort: str
    body: Expr


@dataclass(frozen=True)
class Apply(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Except(Expr):
    fn: Expr
    arg: Expr
    value: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)

Quant = (Forall, Exists)
COMMUTATIVE = (And, Or, Union_, Inter)
SYMMETRIC = (Eq, Iff)

# canonical ordering tag per node kind
_TAGS = {
    cls: i
    for i, cls in enumerate(
        [BoolLit, ElemLit, EmptySet, SortSet, SetLit, ConstRef, VarRef, BoundRef,
         Apply, Except, Union_, Inter, Diff, Eq, In, Subset, Not, And, Or,
         Implies, Iff, Forall, Exists]
    )
}


def _memo_hash(cls):
    # trees are immutable; hashing big clauses repeatedly is the hot path in caches
    raw = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = raw(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__


for _cls in _TAGS:
    _memo_hash(_cls)


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children()))


def size(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def has_primes(e: Expr) -> bool:
    return any(isinstance(n, VarRef) and n.primed for n in walk(e))


def variables(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, VarRef)}


def free_bound(e: Expr, bound=frozenset()) -> set[str]:
    """Bound-variable references not captured by an enclosing quantifier."""
    if isinstance(e, BoundRef):
        return set() if e.name in bound else {e.name}
    if isinstance(e, Quant):
        return free_bound(e.body, bound | {e.var})
    out: set[str] = set()
    for c in e.children():
        out |= free_bound(c, bound)
    return out


def canon_key(e: Expr, scope: tuple = ()) -> tuple:
    """Name-independent structural key; bound references become de Bruijn indices."""
    tag = _TAGS[type(e)]
    if isinstance(e, BoundRef):
        for depth, name in enumerate(reversed(scope)):
            if name == e.name:
                return (tag, depth)
        return (tag, -1, e.name)
    if isinstance(e, Quant):
        return (tag, e.sort, canon_key(e.body, scope + (e.var,)))
    if isinstance(e, BoolLit):
        return (tag, int(e.value))
    if isinstance(e, (VarRef,)):
        return (tag, e.name, int(e.primed))
    if isinstance(e, ConstRef):
        return (tag, e.name)
    if isinstance(e, (ElemLit,)):
        return (tag, e.sort, e.name)
    if isinstance(e, (EmptySet, SortSet)):
        return (tag, e.sort)
    if isinstance(e, SetLit):
        return (tag, e.sort) + tuple(canon_key(c, scope) for c in e.elems)
    return (tag,) + tuple(canon_key(c, scope) for c in e.children())


def conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, And):
        out = []
        for a in e.args:
            out.extend(conjuncts(a))
        return out
    return [e]


def mk_and(args) -> Expr:
    args = tuple(args)
    if not args:
        return TRUE
    return args[0] if len(args) == 1 else And(args)


def mk_or(args) -> Expr:
    args = tuple(args)
    if not args:
        return FALSE
    return args[0] if len(args) == 1 else Or(args)


def neq(a: Expr, b: Expr) -> Expr:
    return Not(Eq(a, b))


def substitute_bound(e: Expr, mapping: dict[str, str]) -> Expr:
    """Rename bound variables (binders and references) per ``mapping``; capture-unsafe by design."""
    if isinstance(e, BoundRef):
        return BoundRef(mapping.get(e.name, e.name))
    if isinstance(e, Quant):
        return type(e)(mapping.get(e.var, e.var), e.sort, substitute_bound(e.body, mapping))
    return rebuild(e, lambda c: substitute_bound(c, mapping))


def rebuild(e: Expr, fn) -> Expr:
    """Apply ``fn`` to every direct child and reconstruct the node."""
    kw = {}
    changed = False
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            nv = fn(v)
            changed |= nv is not v
            kw[f.name] = nv
        elif isinstance(v, tuple):
            nv = tuple(fn(x) if isinstance(x, Expr) else x for x in v)
            changed |= any(a is not b for a, b in zip(nv, v))
            kw[f.name] = nv
        else:
            kw[f.name] = v
    return type(e)(**kw) if changed else e


@dataclass
class TypeEnv:
    """Types of everything an expression may reference."""

    var_types: dict
    const_types: dict
    bound: dict = field(default_factory=dict)

    def with_bound(self, name, sort):
        b = dict(self.bound)
        b[name] = sort
        return TypeEnv(self.var_types, self.const_types, b)


def type_of(e: Expr, env: TypeEnv) -> Type:
    """Type of an already type-checked expression."""
    if isinstance(e, (BoolLit, Not, And, Or, Implies, Iff, Eq, In, Subset, Forall, Exists)):
        return BOOL
    if isinstance(e, VarRef):
        return env.var_types[e.name]
    if isinstance(e, ConstRef):
        return env.const_types[e.name]
    if isinstance(e, BoundRef):
        return ElemType(env.bound[e.name])
    if isinstance(e, ElemLit):
        return ElemType(e.sort)
    if isinstance(e, (SortSet, EmptySet, SetLit)):
        return SetType(e.sort)
    if isinstance(e, (Union_, Inter)):
        return type_of(e.args[0], env)
    if isinstance(e, Diff):
        return type_of(e.lhs, env)
    if isinstance(e, Apply):
        return type_of(e.fn, env).value
    if isinstance(e, Except):
        return type_of(e.fn, env)
    raise TypeError(f"unknown node {e!r}")
