from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, given, settings

from conftest import instance_of, tpc
from invsyn import evaluator as ev
from invsyn.lang import parse_clause
from invsyn.vector import VecEval
from strategies import clause_texts, mini


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(clause_texts())
def test_vector_truth_matches_scalar(text):
    inst = mini()
    e = parse_clause(text, inst.spec, inst)
    codes = np.arange(inst.universe_size, dtype=np.int64)
    vec = VecEval(inst).truth(e, codes)
    f = ev.compile_expr(e, inst)
    scalar = np.array([bool(f(inst.decode(c), {})) for c in codes])
    assert np.array_equal(vec, scalar)


def _scalar_steps(inst, codes):
    out = []
    for k, c in enumerate(codes):
        for st in ev.successors(inst.decode(int(c)), inst):
            out.append((k, st.label, inst.encode(st.state)))
    return out


def _vector_steps(inst, codes):
    ve = VecEval(inst)
    labels = [ev.action_label(a.name, b) for a, b, _ in ve.action_bindings]
    src, lab, suc = ve.step_codes(np.asarray(codes, dtype=np.int64))
    return [(int(s), labels[int(l)], int(q)) for s, l, q in zip(src, lab, suc)]


def test_step_codes_match_scalar_on_mini():
    inst = mini()
    codes = np.arange(inst.universe_size)
    assert _vector_steps(inst, codes) == _scalar_steps(inst, codes)


def test_step_codes_match_scalar_on_benchmarks():
    rng = np.random.default_rng(7)
    for inst in (tpc(2), instance_of("lockserv"), instance_of("consensus")):
        codes = np.sort(rng.choice(inst.universe_size, 1500, replace=False))
        assert _vector_steps(inst, codes) == _scalar_steps(inst, codes)


def test_scan_matches_truth():
    inst = tpc(2)
    ve = VecEval(inst)
    e = inst.spec.safety
    all_codes = np.arange(inst.universe_size, dtype=np.int64)
    assert np.array_equal(ve.scan(e), all_codes[ve.truth(e, all_codes)])


def test_characterized_fast_path_agrees():
    inst = tpc(2)
    ve = VecEval(inst)
    target = inst.decode(4112)
    text = " /\\ ".join(f"{n} = {_lit(inst, n, v)}" for n, v in zip(inst.var_names, target))
    e = parse_clause(f"~({text})", inst.spec, inst)
    codes = np.arange(inst.universe_size, dtype=np.int64)
    assert np.array_equal(ve.truth(e, codes), codes != 4112)


def _lit(inst, name, v):
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    return "{" + ", ".join(inst.value_to_json(inst.var_types[name], v)) + "}"
