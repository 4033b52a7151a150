"""Finite grounding of a protocol spec and the canonical integer state encoding.

Each variable value has an integer *digit*:

* ``BOOL``: 0 / 1
* element of sort S: index of the element in S
* ``SET S``: bitmask, bit i set iff the i-th element of S is a member
* ``[K -> C]``: mixed radix, key i contributes ``digit(value) * |C| ** i``

A state's code is the mixed-radix number of its variable digits, variables in
lexicographic name order with the first name most significant. Canonical
state order is code order.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import InstanceError, MissingConstant, MissingSort
from . import ast as A


@dataclass(frozen=True)
class InstanceConfig:
    sorts: dict
    constants: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, data) -> "InstanceConfig":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        if not isinstance(data, dict) or not isinstance(data.get("sorts", None), dict):
            raise InstanceError("instance config must be an object with a 'sorts' object")
        consts = data.get("constants", {}) or {}
        if not isinstance(consts, dict):
            raise InstanceError("'constants' must be an object")
        return cls({k: list(v) for k, v in data["sorts"].items()}, dict(consts))

    def to_json(self) -> dict:
        return {"sorts": self.sorts, "constants": self.constants}


class GroundInstance:
    """A spec instantiated over concrete finite sorts."""

    def __init__(self, spec, cfg: InstanceConfig):
        self.spec = spec
        self.cfg = cfg
        self.elements: dict[str, tuple] = {}
        for s in spec.sorts:
            if s not in cfg.sorts:
                raise MissingSort(f"instance config has no elements for sort {s!r}")
            elems = cfg.sorts[s]
            if not isinstance(elems, list) or not elems:
                raise MissingSort(f"sort {s!r} must have at least one element")
            if any(not isinstance(x, str) for x in elems):
                raise InstanceError(f"elements of sort {s!r} must be strings")
            if len(set(elems)) != len(elems):
                raise InstanceError(f"duplicate element names in sort {s!r}")
            self.elements[s] = tuple(elems)
        self.index = {s: {e: i for i, e in enumerate(es)} for s, es in self.elements.items()}
        clash = {}
        for s, es in self.elements.items():
            for e in es:
                if e in spec.global_names:
                    raise InstanceError(f"element name {e!r} clashes with a spec name")
                if e in clash and clash[e] != s:
                    raise InstanceError(f"element name {e!r} used by sorts {clash[e]!r} and {s!r}")
                clash[e] = s

        self.constants: dict = {}
        for name, t in spec.constants:
            if name not in cfg.constants:
                raise MissingConstant(f"instance config has no value for constant {name!r}")
            self.constants[name] = self.value_from_json(t, cfg.constants[name], name)

        self.var_names: list[str] = spec.var_names
        self.var_types: dict = spec.var_types
        self.var_pos = {n: i for i, n in enumerate(self.var_names)}
        self.radix = [self.domain_size(self.var_types[n]) for n in self.var_names]
        self.strides = [0] * len(self.radix)
        acc = 1
        for i in range(len(self.radix) - 1, -1, -1):
            self.strides[i] = acc
            acc *= self.radix[i]
        self.universe_size = acc

        self.bindings: dict[str, list[tuple]] = {}
        for act in spec.actions:
            doms = [self.elements[s] for _, s in act.params]
            self.bindings[act.name] = list(itertools.product(*doms))

    # domains ---------------------------------------------------------------
    def sort_size(self, sort: str) -> int:
        return len(self.elements[sort])

    def domain_size(self, t) -> int:
        if isinstance(t, A.BoolType):
            return 2
        if isinstance(t, A.ElemType):
            return self.sort_size(t.sort)
        if isinstance(t, A.SetType):
            return 2 ** self.sort_size(t.sort)
        return self.domain_size(t.value) ** self.sort_size(t.key)

    def domain(self, t) -> list:
        """All values of type ``t`` in digit order."""
        return [self.from_digit(t, d) for d in range(self.domain_size(t))]

    def domain_report(self) -> dict:
        return {
            "sorts": {s: len(es) for s, es in self.elements.items()},
            "variables": {n: r for n, r in zip(self.var_names, self.radix)},
            "bindings": {a: len(b) for a, b in self.bindings.items()},
            "universe": self.universe_size,
        }

    # value <-> digit ------------------------------------------------------
    def to_digit(self, t, v) -> int:
        if isinstance(t, A.BoolType):
            return int(bool(v))
        if isinstance(t, A.ElemType):
            return self.index[t.sort][v]
        if isinstance(t, A.SetType):
            idx = self.index[t.sort]
            return sum(1 << idx[x] for x in v)
        r = self.domain_size(t.value)
        return sum(self.to_digit(t.value, x) * r ** i for i, x in enumerate(v))

    def from_digit(self, t, d: int):
        if isinstance(t, A.BoolType):
            return bool(d)
        if isinstance(t, A.ElemType):
            return self.elements[t.sort][d]
        if isinstance(t, A.SetType):
            es = self.elements[t.sort]
            return frozenset(es[i] for i in range(len(es)) if d >> i & 1)
        r = self.domain_size(t.value)
        out = []
        for _ in range(self.sort_size(t.key)):
            out.append(self.from_digit(t.value, d % r))
            d //= r
        return tuple(out)

    def encode(self, state) -> int:
        code = 0
        for (n, v), stride in zip(zip(self.var_names, state), self.strides):
            code += self.to_digit(self.var_types[n], v) * stride
        return code

    def decode(self, code: int) -> tuple:
        code = int(code)
        if not 0 <= code < self.universe_size:
            raise ValueError(f"state code {code} outside the universe")
        out = []
        for n, stride, r in zip(self.var_names, self.strides, self.radix):
            out.append(self.from_digit(self.var_types[n], (code // stride) % r))
        return tuple(out)

    def all_states(self):
        """Every state of the universe, in canonical order."""
        doms = [self.domain(self.var_types[n]) for n in self.var_names]
        return itertools.product(*doms)

    # JSON ------------------------------------------------------------------
    def value_to_json(self, t, v):
        if isinstance(t, A.BoolType):
            return bool(v)
        if isinstance(t, A.ElemType):
            return v
        if isinstance(t, A.SetType):
            order = self.index[t.sort]
            return sorted(v, key=order.__getitem__)
        return {k: self.value_to_json(t.value, x) for k, x in zip(self.elements[t.key], v)}

    def value_from_json(self, t, j, where="value"):
        try:
            if isinstance(t, A.BoolType):
                if not isinstance(j, bool):
                    raise TypeError
                return j
            if isinstance(t, A.ElemType):
                if j not in self.index[t.sort]:
                    raise TypeError
                return j
            if isinstance(t, A.SetType):
                if not isinstance(j, list) or any(x not in self.index[t.sort] for x in j):
                    raise TypeError
                return frozenset(j)
            if not isinstance(j, dict) or set(j) != set(self.elements[t.key]):
                raise TypeError
            return tuple(self.value_from_json(t.value, j[k], where) for k in self.elements[t.key])
        except (TypeError, KeyError):
            raise InstanceError(f"{where}: {j!r} is not a value of type {t}") from None

    def state_to_json(self, state) -> dict:
        return {n: self.value_to_json(self.var_types[n], v) for n, v in zip(self.var_names, state)}

    def state_from_json(self, obj) -> tuple:
        if not isinstance(obj, dict) or set(obj) != set(self.var_names):
            raise InstanceError("state object must assign exactly the spec variables")
        return tuple(self.value_from_json(self.var_types[n], obj[n], n) for n in self.var_names)

    def state_text(self, state) -> str:
        return json.dumps(self.state_to_json(state), sort_keys=True)


def ground(spec, cfg: InstanceConfig) -> GroundInstance:
    return GroundInstance(spec, cfg)
