"""Naive brute-force oracle used by the tests.

Everything here enumerates the full grounded universe with the scalar
evaluator only. Nothing in this module touches the vectorized engine, the
explorer, or the controller, so agreement with them is meaningful.
"""
from __future__ import annotations

from invsyn import evaluator as ev
from invsyn.lang import ast as A


class Oracle:
    def __init__(self, instance):
        self.inst = instance
        self.states = list(instance.all_states())
        self.succ = {}
        self.labels = {}
        for s in self.states:
            steps = ev.successors(s, instance)
            self.succ[s] = [st.state for st in steps]
            self.labels[s] = [st.label for st in steps]
        self.init = [s for s in self.states if ev.holds(instance.spec.init, s, instance)]
        self.safe = {s for s in self.states if ev.holds(instance.spec.safety, s, instance)}
        self.code = {s: instance.encode(s) for s in self.states}
        self.init_set = set(self.init)
        self._tables = {}

    def table(self, e) -> dict:
        """Truth value of ``e`` on every state, computed once per expression."""
        t = self._tables.get(e)
        if t is None:
            f = ev.compile_expr(e, self.inst)
            t = self._tables[e] = {s: bool(f(s, {})) for s in self.states}
        return t

    def holds(self, e, s) -> bool:
        return self.table(e)[s]

    # reachability ------------------------------------------------------------
    def reachable(self) -> set:
        """Naive fixpoint: repeat one-step image until nothing changes."""
        r = set(self.init)
        while True:
            nxt = set(r)
            for s in r:
                nxt.update(self.succ[s])
            if nxt == r:
                return r
            r = nxt

    # frames ------------------------------------------------------------------
    def in_frame(self, s, index, clauses) -> bool:
        if index == 0:
            return s in self.init_set
        return s in self.safe and all(self.holds(c, s) for c in clauses)

    def frontier(self, index, clauses, excluded=()):
        ex = set(excluded)
        cands = [self.code[s] for s in self.states
                 if self.code[s] not in ex and self.in_frame(s, index, clauses)
                 and any(t not in self.safe for t in self.succ[s])]
        return min(cands) if cands else None

    def predecessor(self, bad_code, index, clauses):
        cands = [self.code[s] for s in self.states
                 if self.in_frame(s, index, clauses)
                 and any(self.code[t] == bad_code for t in self.succ[s])]
        return min(cands) if cands else None

    def admission(self, clause, index, clauses):
        """None on pass, else ('init', pre) or ('consecution', pre, post)."""
        for s in sorted(self.init, key=self.code.get):
            if not self.holds(clause, s):
                return ("init", self.code[s])
        pairs = [(self.code[s], self.code[t]) for s in self.states
                 if self.in_frame(s, index, clauses) and self.holds(clause, s)
                 for t in self.succ[s] if not self.holds(clause, t)]
        return ("consecution",) + min(pairs) if pairs else None

    def push(self, clause, index, clauses):
        pres = [self.code[s] for s in self.states
                if self.in_frame(s, index, clauses)
                and any(not self.holds(clause, t) for t in self.succ[s])]
        return min(pres) if pres else None

    # invariants ----------------------------------------------------------------
    def check_invariant(self, clauses) -> dict:
        inv = A.mk_and(clauses)
        inv_states = [s for s in self.states if self.holds(inv, s)]
        return {
            "initiation": all(self.holds(inv, s) for s in self.init),
            "consecution": all(self.holds(inv, t) for s in inv_states for t in self.succ[s]),
            "safety": all(s in self.safe for s in inv_states),
        }


def quick_invariant_check(instance, clauses) -> dict:
    """Three-condition check without tabulating the whole successor relation.

    Still pure enumeration over every grounded state with the scalar evaluator,
    but only the successors of invariant states are generated, which keeps the
    Node=3 two-phase-commit check tractable.
    """
    inv = A.mk_and(clauses)
    f = ev.compile_expr(inv, instance)
    init = ev.compile_expr(instance.spec.init, instance)
    safety = ev.compile_expr(instance.spec.safety, instance)
    out = {"initiation": True, "consecution": True, "safety": True}
    for s in instance.all_states():
        if not f(s, {}):
            if init(s, {}):
                out["initiation"] = False
            continue
        if not safety(s, {}):
            out["safety"] = False
        for st in ev.successors(s, instance):
            if not f(st.state, {}):
                out["consecution"] = False
    return out


def reachable_violation(instance):
    """A reachable Safety-violating state, found by plain BFS, or None."""
    init = ev.compile_expr(instance.spec.init, instance)
    safety = ev.compile_expr(instance.spec.safety, instance)
    frontier = [s for s in instance.all_states() if init(s, {})]
    seen = set(frontier)
    while frontier:
        nxt = []
        for s in frontier:
            if not safety(s, {}):
                return s
            for st in ev.successors(s, instance):
                if st.state not in seen:
                    seen.add(st.state)
                    nxt.append(st.state)
        frontier = nxt
    return None
