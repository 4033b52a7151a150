"""Exact one-step relational queries over a grounded instance.

The engine precomputes every transition out of the domain ``D = Safety ∪ Init``
once. Frames with index >= 1 are subsets of Safety and frame 0 is Init, so every
query about a frame only needs transitions whose pre-state lies in ``D``. Clause
truth values are cached per clause over ``D`` and over the successor column.

All witnesses are canonical minima: the smallest pre-state code, then the
smallest successor code (or the first label for frontier witnesses).
"""
from __future__ import annotations

import logging
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import QueryBudgetExceeded
from .evaluator import action_label
from .lang import ast as A
from .lang.normalize import normalize_clause
from .lang.printer import to_text
from .vector import CHUNK, VecEval

log = logging.getLogger(__name__)

DEFAULT_QUERY_CAP = 1 << 24
_MASK_CACHE = 1024


@dataclass(frozen=True)
class Frame:
    index: int
    clauses: tuple = ()


@dataclass
class QueryResult:
    witness: Optional[tuple] = None
    witness_code: Optional[int] = None
    successor: Optional[tuple] = None
    successor_code: Optional[int] = None
    label: Optional[str] = None
    kind: Optional[str] = None
    states_examined: int = 0

    @property
    def found(self) -> bool:
        return self.witness_code is not None

    @property
    def ok(self) -> bool:
        """For admission and push checks: passed iff no counterexample."""
        return self.witness_code is None


@dataclass
class ConditionResult:
    ok: bool
    pre: Optional[tuple] = None
    post: Optional[tuple] = None
    label: Optional[str] = None
    clause: Optional[int] = None


@dataclass
class InvariantReport:
    initiation: ConditionResult
    consecution: ConditionResult
    safety: ConditionResult
    # per-clause consecution failures: (clause position, ConditionResult)
    failing_clauses: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.initiation.ok and self.consecution.ok and self.safety.ok


class Engine:
    def __init__(self, instance, query_cap: int = DEFAULT_QUERY_CAP):
        if instance.universe_size > query_cap:
            raise QueryBudgetExceeded(
                f"grounded universe has {instance.universe_size} states, above the query cap {query_cap}")
        self.inst = instance
        self.spec = instance.spec
        self.query_cap = query_cap
        self.ve = VecEval(instance)
        self.stats: Counter = Counter()
        self.labels = [action_label(a.name, b) for a, b, _ in self.ve.action_bindings]

        safe = self.ve.scan(self.spec.safety)
        self.init_codes = self.ve.scan(self.spec.init)
        self.domain = np.union1d(safe, self.init_codes)
        self.is_safe = np.isin(self.domain, safe, assume_unique=True)
        self.is_init = np.isin(self.domain, self.init_codes, assume_unique=True)
        self.src, self.lab, self.suc = self._transitions(self.domain)
        self.suc_safe = self.ve.truth(self.spec.safety, self.suc)
        self._suc_order = np.argsort(self.suc, kind="stable")
        self._suc_sorted = self.suc[self._suc_order]
        bad_step = ~self.suc_safe
        self.has_bad_step = np.zeros(len(self.domain), dtype=bool)
        self.has_bad_step[self.src[bad_step]] = True
        self._dom_masks: OrderedDict = OrderedDict()
        self._suc_masks: OrderedDict = OrderedDict()
        self._frame_masks: OrderedDict = OrderedDict()
        self._forms: dict = {}
        self._safety_forms = {self._form(c) for c in self.spec.safety_conjuncts}
        log.debug("engine: %d domain states, %d transitions", len(self.domain), len(self.suc))

    def _transitions(self, codes):
        srcs, labs, sucs = [], [], []
        for lo in range(0, len(codes), CHUNK):
            s, l, c = self.ve.step_codes(codes[lo:lo + CHUNK])
            srcs.append(s + lo)
            labs.append(l)
            sucs.append(c)
        if not srcs:
            z = np.zeros(0, dtype=np.int64)
            return z, np.zeros(0, dtype=np.int32), z
        return np.concatenate(srcs), np.concatenate(labs), np.concatenate(sucs)

    # masks -----------------------------------------------------------------
    def _cached(self, cache, clause, codes):
        m = cache.get(clause)
        if m is None:
            m = self.ve.truth(clause, codes)
            cache[clause] = m
            if len(cache) > _MASK_CACHE:
                cache.popitem(last=False)
        else:
            cache.move_to_end(clause)
        return m

    def clause_on_domain(self, clause: A.Expr) -> np.ndarray:
        return self._cached(self._dom_masks, clause, self.domain)

    def clause_on_successors(self, clause: A.Expr) -> np.ndarray:
        return self._cached(self._suc_masks, clause, self.suc)

    def frame_mask(self, frame: Frame) -> np.ndarray:
        """Membership of each domain state in the frame (read-only, cached)."""
        if frame.index == 0:
            return self.is_init
        key = frame.clauses
        m = self._frame_masks.get(key)
        if m is None:
            m = self.is_safe.copy()
            for c in frame.clauses:
                m &= self.clause_on_domain(c)
            m.flags.writeable = False
            self._frame_masks[key] = m
            if len(self._frame_masks) > 64:
                self._frame_masks.popitem(last=False)
        return m

    def in_frame(self, code: int, frame: Frame) -> bool:
        i = int(np.searchsorted(self.domain, code))
        if i >= len(self.domain) or self.domain[i] != code:
            return False
        return bool(self.frame_mask(frame)[i])

    def _form(self, e: A.Expr) -> str:
        f = self._forms.get(e)
        if f is None:
            f = self._forms[e] = to_text(normalize_clause(e, self.spec))
        return f

    def _decode(self, code):
        return None if code is None else self.inst.decode(int(code))

    def _result(self, pre=None, post=None, label=None, kind=None, examined=0) -> QueryResult:
        return QueryResult(
            witness=self._decode(pre), witness_code=None if pre is None else int(pre),
            successor=self._decode(post), successor_code=None if post is None else int(post),
            label=None if label is None else self.labels[int(label)], kind=kind,
            states_examined=int(examined))

    def _min_pair(self, tmask):
        """Transition index with the smallest (pre, post) among ``tmask``."""
        idx = np.nonzero(tmask)[0]
        if not len(idx):
            return None
        first = self.src[idx[0]]
        run = idx[self.src[idx] == first]
        return run[np.argmin(self.suc[run])]

    # queries ---------------------------------------------------------------
    def frontier_query(self, frame: Frame, excluded=()) -> QueryResult:
        """Smallest frame state outside ``excluded`` with a Safety-violating successor."""
        self.stats["frontier"] += 1
        fm = self.frame_mask(frame)
        cand = fm & self.has_bad_step
        if len(excluded):
            cand &= ~np.isin(self.domain, np.fromiter((int(c) for c in excluded), dtype=np.int64))
        hits = np.nonzero(cand)[0]
        examined = int(fm.sum())
        if not len(hits):
            return self._result(kind="none", examined=examined)
        i = hits[0]
        lo, hi = np.searchsorted(self.src, [i, i + 1])
        j = lo + int(np.argmax(~self.suc_safe[lo:hi]))
        return self._result(self.domain[i], self.suc[j], self.lab[j], "frontier", examined)

    def predecessor_query(self, bad: int, frame_below: Frame) -> QueryResult:
        """Smallest state of ``frame_below`` with a successor equal to ``bad``."""
        self.stats["predecessor"] += 1
        bad = int(bad)
        lo, hi = np.searchsorted(self._suc_sorted, [bad, bad + 1])
        tr = self._suc_order[lo:hi]
        if len(tr):
            fm = self.frame_mask(frame_below)
            tr = tr[fm[self.src[tr]]]
        if not len(tr):
            return self._result(kind="none", examined=hi - lo)
        # several labels may lead to bad from the same pre-state; keep the first
        j = tr[np.lexsort((self.lab[tr], self.src[tr]))[0]]
        return self._result(self.domain[self.src[j]], bad, self.lab[j], "predecessor", hi - lo)

    def admission_check(self, clause: A.Expr, frame_below: Frame) -> QueryResult:
        """Init => c, then frame_below /\\ c /\\ Next => c'."""
        self.stats["admission"] += 1
        init_ok = self.ve.truth(clause, self.init_codes)
        if not init_ok.all():
            return self._result(self.init_codes[np.argmin(init_ok)], kind="init-violation",
                                examined=len(self.init_codes))
        pre = self.frame_mask(frame_below) & self.clause_on_domain(clause)
        tmask = pre[self.src] & ~self.clause_on_successors(clause)
        j = self._min_pair(tmask)
        examined = len(self.init_codes) + int(pre.sum())
        if j is None:
            return self._result(kind="pass", examined=examined)
        return self._result(self.domain[self.src[j]], self.suc[j], self.lab[j],
                            "consecution-violation", examined)

    def push_check(self, clause: A.Expr, frame: Frame) -> QueryResult:
        """frame /\\ Next => c'; the witness is the push-failure pre-state."""
        self.stats["push"] += 1
        fm = self.frame_mask(frame)
        tmask = fm[self.src] & ~self.clause_on_successors(clause)
        j = self._min_pair(tmask)
        if j is None:
            return self._result(kind="pass", examined=int(fm.sum()))
        return self._result(self.domain[self.src[j]], self.suc[j], self.lab[j],
                            "push-failure", int(fm.sum()))

    # whole-invariant check -------------------------------------------------
    def check_invariant(self, clauses) -> InvariantReport:
        """Initiation, consecution and safety of the conjunction of ``clauses``."""
        self.stats["invariant"] += 1
        clauses = list(clauses)
        inv = A.mk_and(clauses) if clauses else A.BoolLit(True)

        init_ok = self.ve.truth(inv, self.init_codes)
        initiation = ConditionResult(True)
        if not init_ok.all():
            c = self.init_codes[np.argmin(init_ok)]
            initiation = ConditionResult(False, pre=self._decode(c))

        if self._safety_forms <= {self._form(c) for c in clauses}:
            inv_codes = self.domain[self.is_safe & self._conj_on_domain(clauses)]
            safety = ConditionResult(True)
        else:
            inv_codes = self.ve.scan(inv)
            unsafe = ~self.ve.truth(self.spec.safety, inv_codes)
            safety = ConditionResult(True)
            if unsafe.any():
                safety = ConditionResult(False, pre=self._decode(inv_codes[np.argmax(unsafe)]))

        best, failing, failed = None, [], set()
        for lo in range(0, len(inv_codes), CHUNK):
            block = inv_codes[lo:lo + CHUNK]
            src, lab, suc = self.ve.step_codes(block)
            if not len(suc):
                continue
            for k, c in enumerate(clauses):
                if k in failed:
                    continue
                bad = np.nonzero(~self.ve.truth(c, suc))[0]
                if not len(bad):
                    continue
                first = src[bad[0]]
                run = bad[src[bad] == first]
                j = run[np.argmin(suc[run])]
                failing.append((k, (int(block[src[j]]), int(suc[j]), int(lab[j]))))
                failed.add(k)
        failing.sort()
        results = []
        for k, (p, q, l) in failing:
            r = ConditionResult(False, self._decode(p), self._decode(q), self.labels[l], k)
            results.append((k, r))
            if best is None or (p, q) < best[0]:
                best = ((p, q), r)
        consecution = ConditionResult(True) if best is None else best[1]
        return InvariantReport(initiation, consecution, safety, results)

    def _conj_on_domain(self, clauses):
        m = np.ones(len(self.domain), dtype=bool)
        for c in clauses:
            m &= self.clause_on_domain(c)
        return m
