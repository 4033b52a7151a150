"""Render resolved expressions back to source text that re-parses to the same tree."""
from __future__ import annotations

from . import ast as A

# binding strength; higher binds tighter
_P_QUANT, _P_IFF, _P_IMP, _P_OR, _P_AND, _P_NOT, _P_REL, _P_UNION, _P_INTER, _P_POST, _P_ATOM = range(11)


def _prec(e: A.Expr) -> int:
    if isinstance(e, A.Quant):
        return _P_QUANT
    if isinstance(e, A.Iff):
        return _P_IFF
    if isinstance(e, A.Implies):
        return _P_IMP
    if isinstance(e, A.Or):
        return _P_OR
    if isinstance(e, A.And):
        return _P_AND
    if isinstance(e, A.Not):
        if isinstance(e.arg, (A.Eq, A.In)):
            return _P_REL
        return _P_NOT
    if isinstance(e, (A.Eq, A.In, A.Subset)):
        return _P_REL
    if isinstance(e, (A.Union_, A.Diff)):
        return _P_UNION
    if isinstance(e, A.Inter):
        return _P_INTER
    if isinstance(e, A.Apply):
        return _P_POST
    return _P_ATOM


def _wrap(e: A.Expr, min_prec: int) -> str:
    s = to_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_text(e: A.Expr) -> str:
    if isinstance(e, A.BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, A.VarRef):
        return e.name + ("'" if e.primed else "")
    if isinstance(e, (A.ConstRef, A.BoundRef)):
        return e.name
    if isinstance(e, A.ElemLit):
        return e.name
    if isinstance(e, A.SortSet):
        return e.sort
    if isinstance(e, A.EmptySet):
        return "{}"
    if isinstance(e, A.SetLit):
        return "{" + ", ".join(to_text(x) for x in e.elems) + "}"
    if isinstance(e, A.Not):
        if isinstance(e.arg, A.Eq):
            return f"{_wrap(e.arg.lhs, _P_UNION)} # {_wrap(e.arg.rhs, _P_UNION)}"
        if isinstance(e.arg, A.In):
            return f"{_wrap(e.arg.elem, _P_UNION)} \\notin {_wrap(e.arg.set, _P_UNION)}"
        return "~" + _wrap(e.arg, _P_NOT)
    if isinstance(e, A.And):
        return " /\\ ".join(_wrap(x, _P_AND + 1) for x in e.args)
    if isinstance(e, A.Or):
        return " \\/ ".join(_wrap(x, _P_OR + 1) for x in e.args)
    if isinstance(e, A.Implies):
        return f"{_wrap(e.lhs, _P_IMP + 1)} => {_wrap(e.rhs, _P_IMP)}"
    if isinstance(e, A.Iff):
        return f"{_wrap(e.lhs, _P_IFF + 1)} <=> {_wrap(e.rhs, _P_IFF + 1)}"
    if isinstance(e, A.Eq):
        return f"{_wrap(e.lhs, _P_UNION)} = {_wrap(e.rhs, _P_UNION)}"
    if isinstance(e, A.In):
        return f"{_wrap(e.elem, _P_UNION)} \\in {_wrap(e.set, _P_UNION)}"
    if isinstance(e, A.Subset):
        return f"{_wrap(e.lhs, _P_UNION)} \\subseteq {_wrap(e.rhs, _P_UNION)}"
    if isinstance(e, A.Union_):
        return " \\cup ".join(
            _wrap(x, _P_UNION if i == 0 else _P_INTER) for i, x in enumerate(e.args))
    if isinstance(e, A.Diff):
        return f"{_wrap(e.lhs, _P_UNION)} \\ {_wrap(e.rhs, _P_INTER)}"
    if isinstance(e, A.Inter):
        return " \\cap ".join(
            _wrap(x, _P_INTER if i == 0 else _P_POST) for i, x in enumerate(e.args))
    if isinstance(e, A.Apply):
        return f"{_wrap(e.fn, _P_POST)}[{to_text(e.arg)}]"
    if isinstance(e, A.Except):
        return f"[{to_text(e.fn)} EXCEPT ![{to_text(e.arg)}] = {to_text(e.value)}]"
    if isinstance(e, A.Quant):
        q = "\\A" if isinstance(e, A.Forall) else "\\E"
        return f"{q} {e.var} \\in {e.sort} : {to_text(e.body)}"
    raise TypeError(f"cannot print {e!r}")
