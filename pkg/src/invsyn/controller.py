"""IC3 loop with proposer-supplied blocking clauses.

Frames are lists of clause ids. Frame 0 is Init and has no clauses; frame i >= 1
means Safety plus its clauses. Clause ids index a run-scoped memory keyed by
normal form.
"""
from __future__ import annotations

import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import explorer
from .errors import AggregateAdmissionFailed, NotInductiveInput, SynthesisTimeout
from .lang import ast as A
from .lang.normalize import extract_quantifier_templates, normalize_clause
from .lang.printer import to_text
from .proposer.base import NullProposer, ProposalContext, record_observation
from .witness import DEFAULT_QUERY_CAP, Engine, Frame

log = logging.getLogger(__name__)

SAFETY = "safety-conjunct"
AGGREGATE = "aggregate-fallback"


@dataclass
class Clause:
    id: int
    name: str
    body: A.Expr
    provenance: str
    observations: list = field(default_factory=list)

    @cached_property
    def text(self) -> str:
        return to_text(self.body)

    @cached_property
    def size(self) -> int:
        return A.size(self.body)

    @property
    def held(self) -> Optional[bool]:
        return self.observations[-1][0] if self.observations else None


class ClauseMemory:
    """All screened clauses of a run, deduplicated by normal form."""

    def __init__(self):
        self.clauses: list[Clause] = []
        self.by_text: dict[str, int] = {}
        self._names: set = set()

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __getitem__(self, cid: int) -> Clause:
        return self.clauses[cid]

    def get(self, key):
        if isinstance(key, Clause):
            return self.clauses[key.id] if key.id < len(self.clauses) else None
        if isinstance(key, int):
            return self.clauses[key] if 0 <= key < len(self.clauses) else None
        if isinstance(key, A.Expr):
            key = to_text(key)
        cid = self.by_text.get(key)
        return None if cid is None else self.clauses[cid]

    def add(self, name: str, body: A.Expr, provenance: str) -> tuple[Clause, bool]:
        text = to_text(body)
        cid = self.by_text.get(text)
        if cid is not None:
            return self.clauses[cid], False
        base, n = name, 2
        while name in self._names:
            name = f"{base}_{n}"
            n += 1
        self._names.add(name)
        c = Clause(len(self.clauses), name, body, provenance)
        self.clauses.append(c)
        self.by_text[text] = c.id
        return c, True

    def known_true(self) -> list[Clause]:
        return [c for c in self.clauses if c.held is True]

    def known_false(self) -> list[Clause]:
        return [c for c in self.clauses if c.held is False]


class FrameChain:
    def __init__(self):
        self.frames: list[list[int]] = [[], []]

    def __len__(self):
        return len(self.frames)

    @property
    def top(self) -> int:
        return len(self.frames) - 1

    def ids(self, i: int) -> list[int]:
        return self.frames[i]

    def add(self, cid: int, upto: int):
        """Insert into frames 1..upto (those that lack it)."""
        for i in range(1, upto + 1):
            if cid not in self.frames[i]:
                self.frames[i].append(cid)

    def containment_ok(self) -> bool:
        return all(set(self.frames[i + 1]) <= set(self.frames[i]) for i in range(1, self.top))

    def to_json(self, memory: ClauseMemory) -> list:
        return [[memory[c].name for c in f] for f in self.frames]


@dataclass
class SynthConfig:
    timeout_secs: float = 600.0
    query_cap: int = DEFAULT_QUERY_CAP
    learn_rounds: int = 3
    batch_cap: int = 16
    reach_max_states: Optional[int] = None
    reach_max_depth: Optional[int] = None
    max_frames: int = 200


@dataclass
class Entry:
    code: int
    level: int
    child: Optional[int] = None        # worklist index of the state this one steps to
    label: Optional[str] = None        # action label of that step
    bad_succ: Optional[int] = None     # for frontier witnesses: the unsafe successor
    bad_label: Optional[str] = None
    pred_free: bool = False
    pred: Optional[int] = None         # worklist index of a known predecessor entry


@dataclass
class SynthesisResult:
    verdict: str                       # "invariant" | "unsafe"
    invariant: list = field(default_factory=list)   # Clause list, Safety first
    trace: list = field(default_factory=list)       # [(state, label)]
    stats: dict = field(default_factory=dict)
    frames: list = field(default_factory=list)
    fixpoint: Optional[int] = None


class _Unsafe(Exception):
    def __init__(self, trace):
        self.trace = trace


class Controller:
    def __init__(self, instance, proposer=None, config: Optional[SynthConfig] = None,
                 on_step: Optional[Callable] = None, engine: Optional[Engine] = None,
                 reach: Optional[explorer.ReachSet] = None, spec_text: Optional[str] = None):
        self.inst = instance
        self.spec = instance.spec
        self.proposer = proposer or NullProposer()
        self.config = config or SynthConfig()
        self.on_step = on_step
        self.engine = engine or Engine(instance, self.config.query_cap)
        self.reach = reach or explorer.reachable(
            instance, self.config.reach_max_states, self.config.reach_max_depth)
        self.ve = self.engine.ve
        self.spec_text = spec_text if spec_text is not None else (self.spec.source or "")
        self.templates = tuple(t.render() for t in extract_quantifier_templates(self.spec))
        self.memory = ClauseMemory()
        self.frames = FrameChain()
        self.admitted_order: dict[int, int] = {}
        self.stats = Counter()
        self._deadline = None
        self.safety_clauses = [
            Clause(-(i + 1), f"Safety_{i + 1}", normalize_clause(c, self.spec), SAFETY)
            for i, c in enumerate(self.spec.safety_conjuncts)]

    # helpers ---------------------------------------------------------------
    def frame(self, i: int) -> Frame:
        return Frame(i, tuple(self.memory[c].body for c in self.frames.ids(i)))

    def _step(self, what: str):
        if self.on_step is not None:
            self.on_step(self, what)

    def _check_time(self):
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise SynthesisTimeout("synthesis time budget exhausted", partial=self.snapshot())

    def snapshot(self) -> dict:
        return {
            "frames": self.frames.to_json(self.memory),
            "clauses": {c.name: c.text for c in self.memory if any(c.id in f for f in self.frames.frames)},
            "stats": dict(self.stats),
        }

    def in_frame(self, code: int, level: int) -> bool:
        return self.engine.in_frame(code, self.frame(level))

    def _admit(self, clause: Clause, level: int):
        self.frames.add(clause.id, level)
        self.admitted_order.setdefault(clause.id, len(self.admitted_order))
        self.stats["admitted"] += 1
        if clause.provenance == AGGREGATE:
            self.stats["fallback_clauses"] += 1
        log.info("admitted %s at levels 1..%d: %s", clause.name, level, clause.text[:120])
        self._step("admit")

    def _state_json(self, code: int) -> str:
        return self.inst.state_text(self.inst.decode(code))

    # memory admission --------------------------------------------------------
    def admit_from_memory(self, bad_codes, level: int) -> list[Clause]:
        """Try held memory clauses in coverage order; admit the first that passes."""
        if not len(bad_codes):
            raise ValueError("admit_from_memory needs at least one bad state")
        present = set(self.frames.ids(level))
        pool = [c for c in self.memory.known_true() if c.id not in present]
        below = self.frame(level - 1)
        for c, _ in explorer.coverage_rank(pool, list(bad_codes), self.inst, self.ve):
            self._check_time()
            if self.engine.admission_check(c.body, below).ok:
                self._admit(c, level)
                return [c]
        return []

    # learning ----------------------------------------------------------------
    def _context(self, bad_codes) -> ProposalContext:
        existing = []
        for c in self.frames.ids(1):
            existing.append(self.memory[c].text)
        return ProposalContext(
            spec_text=self.spec_text,
            bad_states=tuple(self._state_json(c) for c in bad_codes),
            templates=self.templates,
            existing_clauses=tuple(existing),
            known_true=tuple(c.text for c in self.memory.known_true() if c.id not in self.frames.ids(1)),
            known_false=tuple((c.text, c.observations[-1][1]) for c in self.memory.known_false()),
            bad_raw=tuple(int(c) for c in bad_codes),
        )

    def learn(self, bad_codes) -> int:
        """One proposer call; screen the batch and merge it into memory. Returns #new held clauses."""
        ctx = self._context(bad_codes)
        self.stats["proposer_calls"] += 1
        try:
            batch = self.proposer.propose(ctx)
        except Exception as e:  # ProposerUnavailable and transport failures
            log.warning("proposer failed: %s", e)
            return 0
        for d in batch.diagnostics:
            log.debug("proposal diagnostic: %s", d)
        fresh = []
        for it in batch.items:
            body = it.expr if it.expr is not None else None
            if body is None:
                continue
            c, new = self.memory.add(it.name, body, self.proposer.kind)
            if new:
                fresh.append(c)
        rep = explorer.screen_clauses(fresh, self.reach, self.ve)
        for c in rep.kept:
            record_observation(self.memory, c, True)
        for c, w in rep.falsified:
            record_observation(self.memory, c, False, self.inst.state_text(w))
        self.stats["proposed"] += len(batch.items)
        return len(rep.kept)

    # fallback ------------------------------------------------------------------
    def characterization(self, code: int) -> A.Expr:
        state = self.inst.decode(code)
        eqs = []
        for name, v in zip(self.inst.var_names, state):
            t = self.inst.var_types[name]
            if isinstance(t, A.MapType):
                keys = self.inst.elements[t.key]
                for k, x in zip(keys, v):
                    eqs.append(A.Eq(A.Apply(A.VarRef(name), A.ElemLit(t.key, k)), self._literal(t.value, x)))
            else:
                eqs.append(A.Eq(A.VarRef(name), self._literal(t, v)))
        return A.mk_and(eqs)

    def _literal(self, t, v) -> A.Expr:
        if isinstance(t, A.BoolType):
            return A.BoolLit(bool(v))
        if isinstance(t, A.ElemType):
            return A.ElemLit(t.sort, v)
        es = [x for x in self.inst.elements[t.sort] if x in v]
        if not es:
            return A.EmptySet(t.sort)
        return A.SetLit(t.sort, tuple(A.ElemLit(t.sort, x) for x in es))

    def fallback_aggregate_block(self, bad_codes, level: int) -> Clause:
        """Admit the conjunction of negated full characterizations of ``bad_codes``."""
        if not len(bad_codes):
            raise ValueError("fallback_aggregate_block needs at least one bad state")
        body = normalize_clause(A.mk_and([A.Not(self.characterization(c)) for c in sorted(bad_codes)]),
                                self.spec)
        c, _ = self.memory.add(f"aggregate_{self.stats['fallback_clauses'] + 1}", body, AGGREGATE)
        if c.held is None:
            rep = explorer.screen_clauses([c], self.reach, self.ve)
            record_observation(self.memory, c, bool(rep.kept),
                               None if rep.kept else self.inst.state_text(rep.falsified[0][1]))
        res = self.engine.admission_check(c.body, self.frame(level - 1))
        if not res.ok:
            raise AggregateAdmissionFailed(
                f"aggregate clause failed admission at level {level}: {res.kind}")
        self._admit(c, level)
        return c

    # tracing ---------------------------------------------------------------------
    def _chain(self, worklist, idx):
        """[(state, label)] following child links from worklist[idx] to the unsafe state."""
        out = []
        while True:
            e = worklist[idx]
            if e.child is None:
                out.append((self.inst.decode(e.bad_succ), e.bad_label))
                return out
            out.append((self.inst.decode(worklist[e.child].code), e.label))
            idx = e.child

    def _unsafe_from_init(self, init_code, label, worklist, idx):
        trace = [(self.inst.decode(init_code), None),
                 (self.inst.decode(worklist[idx].code), label)]
        return trace + self._chain(worklist, idx)

    # Algorithm: frontier blocking ----------------------------------------------
    def _live(self, worklist) -> list[int]:
        """Indices of entries still inside the frame at their level."""
        dom = self.engine.domain
        by_level: dict = {}
        for i, e in enumerate(worklist):
            by_level.setdefault(e.level, []).append(i)
        live = []
        for level, idx in by_level.items():
            codes = np.array([worklist[i].code for i in idx], dtype=np.int64)
            pos = np.minimum(np.searchsorted(dom, codes), len(dom) - 1)
            ok = (dom[pos] == codes) & self.engine.frame_mask(self.frame(level))[pos]
            live.extend(i for i, o in zip(idx, ok) if o)
        return sorted(live)

    def block_frontier(self) -> bool:
        k = self.frames.top
        seen: set = set()
        worklist: list[Entry] = []
        present: dict = {}
        failures = 0

        def requery() -> bool:
            r = self.engine.frontier_query(self.frame(k), seen)
            if not r.found:
                return False
            seen.add(r.witness_code)
            present.setdefault((r.witness_code, k), len(worklist))
            worklist.append(Entry(r.witness_code, k, bad_succ=r.successor_code, bad_label=r.label))
            return True

        if not requery():
            return True
        self.stats["frontier_rounds"] += 1
        while True:
            self._check_time()
            live = self._live(worklist)
            if not live:
                if requery():
                    continue
                return True
            alive = set(live)

            # predecessor descent, lowest level first; predecessor-free is permanent
            # within a round because frames only lose states
            stack = sorted(live, key=lambda i: (worklist[i].level, worklist[i].code), reverse=True)
            while stack:
                i = stack.pop()
                e = worklist[i]
                if e.pred_free or (e.pred is not None and e.pred in alive):
                    continue
                r = self.engine.predecessor_query(e.code, self.frame(e.level - 1))
                if not r.found:
                    e.pred_free = True
                    continue
                if e.level - 1 == 0:
                    raise _Unsafe(self._unsafe_from_init(r.witness_code, r.label, worklist, i))
                key = (r.witness_code, e.level - 1)
                j = present.get(key)
                if j is None:
                    j = len(worklist)
                    present[key] = j
                    worklist.append(Entry(r.witness_code, e.level - 1, child=i, label=r.label))
                    alive.add(j)
                    stack.append(j)
                e.pred = j
            pred_free = [i for i in sorted(alive) if worklist[i].pred_free]

            level = min(worklist[i].level for i in pred_free)
            targets = sorted(worklist[i].code for i in pred_free if worklist[i].level == level)

            if self.admit_from_memory(targets, level):
                self.stats["memory_hits"] += 1
                failures = 0
                continue

            if failures < self.config.learn_rounds:
                others = [worklist[i].code for i in sorted(alive) if worklist[i].level >= level]
                batch = list(dict.fromkeys(targets + others))
                self.learn(batch[:self.config.batch_cap])
                if self.admit_from_memory(targets, level):
                    failures = 0
                else:
                    failures += 1
                requery()
                continue

            if requery():
                continue

            # learning exhausted and no new frontier witness
            if self.reach.complete:
                for t in targets:
                    if self.reach.contains(t):
                        idx = present[(t, level)]
                        raise _Unsafe(explorer.trace_to(t, self.reach) + self._chain(worklist, idx))
            self.fallback_aggregate_block(targets, level)

    # Algorithm: push -----------------------------------------------------------------
    def _block_pre_state(self, code: int, level: int) -> bool:
        """One opportunistic attempt to exclude ``code`` from frame ``level``."""
        if self.admit_from_memory([code], level):
            self.stats["memory_hits"] += 1
            return True
        if self.learn([code]):
            return bool(self.admit_from_memory([code], level))
        return False

    def push_clauses(self):
        self.frames.frames.append([])
        self._step("new-frame")
        top = self.frames.top
        for i in range(1, top):
            pos = 0
            while pos < len(self.frames.ids(i)):
                self._check_time()
                cid = self.frames.ids(i)[pos]
                pos += 1
                if cid in self.frames.ids(i + 1):
                    continue
                while True:
                    r = self.engine.push_check(self.memory[cid].body, self.frame(i))
                    if r.ok:
                        self.frames.frames[i + 1].append(cid)
                        self.stats["pushed"] += 1
                        self._step("push")
                        break
                    self.stats["push_failures"] += 1
                    if not self._block_pre_state(r.witness_code, i):
                        break
                    # a new clause entered frame i: restart its scan
                    pos = 0

    def find_fixpoint(self) -> Optional[int]:
        return find_fixpoint(self.frames.frames)

    def extract_invariant(self, j: int) -> list[Clause]:
        ids = sorted(self.frames.ids(j), key=lambda c: self.admitted_order[c])
        return list(self.safety_clauses) + [self.memory[c] for c in ids]

    # main loop -------------------------------------------------------------------------
    def run(self) -> SynthesisResult:
        start = time.monotonic()
        self._deadline = start + self.config.timeout_secs if self.config.timeout_secs else None
        try:
            result = self._run()
        finally:
            self.stats["queries"] = sum(self.engine.stats.values())
        result.stats = self.result_stats()
        log.info("synthesis finished in %.2fs: %s", time.monotonic() - start, result.verdict)
        return result

    def result_stats(self) -> dict:
        return {
            "rounds": self.stats["rounds"],
            "frontier_rounds": self.stats["frontier_rounds"],
            "proposer_calls": self.stats["proposer_calls"],
            "proposed": self.stats["proposed"],
            "clauses_admitted": self.stats["admitted"],
            "fallback_clauses": self.stats["fallback_clauses"],
            "memory_hits": self.stats["memory_hits"],
            "pushed": self.stats["pushed"],
            "push_failures": self.stats["push_failures"],
            "memory": len(self.memory),
            "frames": len(self.frames),
            "queries": dict(sorted(self.engine.stats.items())),
            "reachable_states": len(self.reach),
        }

    def _run(self) -> SynthesisResult:
        eng = self.engine
        bad_init = eng.init_codes[~eng.ve.truth(self.spec.safety, eng.init_codes)]
        if len(bad_init):
            trace = [(self.inst.decode(bad_init[0]), None)]
            return SynthesisResult("unsafe", trace=trace, frames=self.frames.to_json(self.memory))
        self._step("init")
        while True:
            self._check_time()
            self.stats["rounds"] += 1
            try:
                if not self.block_frontier():
                    raise AssertionError("unreachable")
            except _Unsafe as u:
                return SynthesisResult("unsafe", trace=u.trace, frames=self.frames.to_json(self.memory))
            self.push_clauses()
            j = self.find_fixpoint()
            if j is not None:
                inv = self.extract_invariant(j)
                rep = eng.check_invariant([c.body for c in inv])
                if not rep.ok:
                    raise AssertionError(f"fixpoint frame {j} is not an inductive invariant")
                return SynthesisResult("invariant", invariant=inv,
                                       frames=self.frames.to_json(self.memory), fixpoint=j)
            if self.frames.top >= self.config.max_frames:
                raise SynthesisTimeout("frame limit reached", partial=self.snapshot())


def find_fixpoint(frames) -> Optional[int]:
    """Smallest j >= 1 whose clause set equals that of frame j + 1."""
    for j in range(1, len(frames) - 1):
        if set(frames[j]) == set(frames[j + 1]):
            return j
    return None


def synthesize(instance, proposer=None, config: Optional[SynthConfig] = None, **kw) -> SynthesisResult:
    return Controller(instance, proposer, config, **kw).run()


def minimize_invariant(clauses, instance=None, engine: Optional[Engine] = None):
    """Greedy oldest-first removal of non-Safety clauses until no single removal is possible.

    ``clauses`` are Clause objects or expressions; Clause objects with Safety
    provenance, or expressions equal to a Safety conjunct, are never removed.
    Returns (kept, removed).
    """
    engine = engine or Engine(instance)
    spec = engine.spec
    safety_forms = {to_text(normalize_clause(c, spec)) for c in spec.safety_conjuncts}

    def body(c):
        return c.body if isinstance(c, Clause) else c

    def protected(c):
        if isinstance(c, Clause) and c.provenance == SAFETY:
            return True
        return to_text(normalize_clause(body(c), spec)) in safety_forms

    current = list(clauses)
    rep = engine.check_invariant([body(c) for c in current])
    if not rep.ok:
        raise NotInductiveInput("input is not an inductive invariant implying Safety", rep)
    removed = []
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(current):
            c = current[i]
            if protected(c):
                i += 1
                continue
            trial = current[:i] + current[i + 1:]
            if engine.check_invariant([body(x) for x in trial]).ok:
                removed.append(c)
                current = trial
                changed = True
            else:
                i += 1
    return current, removed


def result_to_json(result: SynthesisResult, instance) -> dict:
    out = {
        "verdict": result.verdict,
        "stats": result.stats,
        "frames": result.frames,
    }
    if result.verdict == "invariant":
        out["fixpoint"] = result.fixpoint
        out["invariant"] = [{"name": c.name, "clause": c.text, "provenance": c.provenance}
                            for c in result.invariant]
    else:
        out["trace"] = [{"action": l, "state": instance.state_to_json(s)} for s, l in result.trace]
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
