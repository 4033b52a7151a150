"""Eager reachability, clause screening, coverage ranking and trace reconstruction."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import StateNotReachable
from .evaluator import action_label
from .lang import ast as A
from .lang.printer import to_text
from .vector import VecEval

log = logging.getLogger(__name__)


@dataclass
class ReachSet:
    instance: object
    order: np.ndarray          # codes in BFS order, canonical within a level
    depth: np.ndarray          # BFS depth, aligned with ``order``
    parent_code: np.ndarray    # -1 for init states
    parent_label: list         # None for init states
    diameter: int = 0
    budget_exceeded: bool = False
    budget_reason: Optional[str] = None
    codes: np.ndarray = field(init=False)

    def __post_init__(self):
        self._pos = np.argsort(self.order, kind="stable")
        self.codes = self.order[self._pos]

    def __len__(self):
        return len(self.order)

    @property
    def complete(self) -> bool:
        return not self.budget_exceeded

    @property
    def states(self) -> list:
        """Decoded states in BFS order."""
        return [self.instance.decode(c) for c in self.order]

    def index_of(self, code: int) -> Optional[int]:
        i = int(np.searchsorted(self.codes, code))
        if i < len(self.codes) and self.codes[i] == code:
            return int(self._pos[i])
        return None

    def contains(self, state) -> bool:
        code = state if isinstance(state, (int, np.integer)) else self.instance.encode(state)
        return self.index_of(int(code)) is not None

    def parent(self, state):
        """(predecessor state, action label) or None for an init state."""
        i = self.index_of(self.instance.encode(state))
        if i is None:
            raise StateNotReachable("state is not in the reachable set")
        if self.parent_code[i] < 0:
            return None
        return self.instance.decode(self.parent_code[i]), self.parent_label[i]

    def report(self) -> dict:
        return {
            "states": len(self),
            "diameter": self.diameter,
            "init_states": int((self.depth == 0).sum()),
            "budget_exceeded": self.budget_exceeded,
            "budget_reason": self.budget_reason,
            "universe": self.instance.universe_size,
        }


def reachable(instance, max_states: Optional[int] = None, max_depth: Optional[int] = None) -> ReachSet:
    """Breadth-first fixpoint from the initial states.

    Within a level states are visited in code order and a new state's parent is
    its smallest predecessor in the previous level (first label on ties).
    """
    if max_states is not None and max_states < 1 or max_depth is not None and max_depth < 0:
        raise ValueError("reachability limits must be positive")
    ve = VecEval(instance)
    labels = [action_label(a.name, b) for a, b, _ in ve.action_bindings]
    level = ve.scan(instance.spec.init)
    seen = level.copy()
    order, depth, pcode, plab = [level], [np.zeros(len(level), dtype=np.int64)], \
        [np.full(len(level), -1, dtype=np.int64)], [np.full(len(level), -1, dtype=np.int64)]
    total, d = len(level), 0
    exceeded, reason = False, None
    while len(level):
        if max_states is not None and total > max_states:
            exceeded, reason = True, "states"
            break
        if max_depth is not None and d >= max_depth:
            src, _, suc = ve.step_codes(level)
            if len(np.setdiff1d(suc, seen)):
                exceeded, reason = True, "depth"
            break
        src, lab, suc = ve.step_codes(level)
        fresh = ~np.isin(suc, seen)
        src, lab, suc = src[fresh], lab[fresh], suc[fresh]
        new, first = np.unique(suc, return_index=True)
        d += 1
        order.append(new)
        depth.append(np.full(len(new), d, dtype=np.int64))
        pcode.append(level[src[first]])
        plab.append(lab[first].astype(np.int64))
        seen = np.union1d(seen, new)
        total += len(new)
        level = new
    order_a = np.concatenate(order)
    depth_a = np.concatenate(depth)
    pcode_a = np.concatenate(pcode)
    plab_a = np.concatenate(plab)
    if max_states is not None and len(order_a) > max_states:
        exceeded, reason = True, "states"
        order_a, depth_a = order_a[:max_states], depth_a[:max_states]
        pcode_a, plab_a = pcode_a[:max_states], plab_a[:max_states]
    diameter = int(depth_a.max()) if len(depth_a) else 0
    if exceeded:
        log.warning("reachability budget exceeded (%s); %d states kept", reason, len(order_a))
    return ReachSet(instance, order_a, depth_a, pcode_a,
                    [None if l < 0 else labels[l] for l in plab_a],
                    diameter, exceeded, reason)


@dataclass
class ScreenReport:
    kept: list
    falsified: list  # (clause, witness state)


def _body(c):
    return c if isinstance(c, A.Expr) else c.body


def _size(c) -> int:
    return A.size(c) if isinstance(c, A.Expr) else c.size


def _text(c) -> str:
    return to_text(c) if isinstance(c, A.Expr) else c.text


def screen_clauses(cands, reach: ReachSet, ve: Optional[VecEval] = None) -> ScreenReport:
    """Split candidates into those true on every reachable state and those falsified.

    The witness for a falsified clause is its smallest falsifying state in code order.
    """
    ve = ve or VecEval(reach.instance)
    kept, falsified = [], []
    for c in cands:
        ok = ve.truth(_body(c), reach.codes)
        if ok.all():
            kept.append(c)
        else:
            falsified.append((c, reach.instance.decode(reach.codes[np.argmin(ok)])))
    return ScreenReport(kept, falsified)


def coverage_rank(clauses, bad, instance, ve: Optional[VecEval] = None) -> list:
    """(clause, count) for clauses false on at least one bad state, best first."""
    if not len(bad) or not clauses:
        return []
    ve = ve or VecEval(instance)
    codes = np.array([b if isinstance(b, (int, np.integer)) else instance.encode(b) for b in bad],
                     dtype=np.int64)
    ranked = []
    for c in clauses:
        n = int((~ve.truth(_body(c), codes)).sum())
        if n:
            ranked.append(((-n, _size(c), _text(c)), c, n))
    ranked.sort(key=lambda r: r[0])
    return [(c, n) for _, c, n in ranked]


def trace_to(state, reach: ReachSet) -> list:
    """[(state, label)] from an init state to ``state``; the first label is None."""
    inst = reach.instance
    code = state if isinstance(state, (int, np.integer)) else inst.encode(state)
    i = reach.index_of(int(code))
    if i is None:
        raise StateNotReachable("state is not in the reachable set")
    out = []
    while True:
        out.append((inst.decode(reach.order[i]), reach.parent_label[i]))
        if reach.parent_code[i] < 0:
            break
        i = reach.index_of(int(reach.parent_code[i]))
    out.reverse()
    return out
