from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import instance_from, spec_of, tpc
from invsyn import evaluator as ev
from invsyn.errors import (
    InstanceError,
    MissingSort,
    PrimedVariableError,
    SpecError,
    SpecNameError,
    SpecSyntaxError,
    SpecTypeError,
)
from invsyn.lang import (
    InstanceConfig,
    ast as A,
    canonical_text,
    extract_quantifier_templates,
    ground,
    normalize_clause,
    parse_clause,
    parse_spec,
    to_text,
)
from strategies import clause_texts, mini

SET_VARS = ["alive", "decide_abort", "decide_commit", "go_abort", "go_commit", "vote_no", "vote_yes"]


# parse_spec -----------------------------------------------------------------------
def test_two_phase_commit_variables():
    spec = spec_of("two_phase_commit")
    sets = sorted(n for n, t in spec.var_types.items() if isinstance(t, A.SetType))
    assert sets == SET_VARS
    assert all(spec.var_types[n] == A.SetType("Node") for n in sets)
    assert spec.var_types["abort_flag"] == A.BoolType()
    assert len(spec.var_types) == 8
    assert len(spec.safety_conjuncts) == 3


def test_empty_source_is_syntax_error_at_origin():
    with pytest.raises(SpecSyntaxError) as ei:
        parse_spec("")
    d = ei.value.diagnostics[0]
    assert (d.line, d.col) == (1, 1)


def test_double_update_names_the_variable():
    src = """
    SORT Node
    VAR s : SET Node
    INIT s = {}
    ACTION A(n : Node) { s' = s \\cup {n}; s' = {}; }
    SAFETY TRUE
    """
    with pytest.raises(SpecTypeError) as ei:
        parse_spec(src)
    assert "s" in str(ei.value)


def test_missing_update_is_rejected():
    src = """
    SORT Node
    VAR s, t : SET Node
    INIT s = {}
    ACTION A(n : Node) { s' = {n}; }
    SAFETY TRUE
    """
    with pytest.raises(SpecError) as ei:
        parse_spec(src)
    assert "t" in str(ei.value)


def test_unresolved_identifier():
    src = "SORT Node\nVAR s : SET Node\nINIT s = nope\nSAFETY TRUE\n"
    with pytest.raises(SpecNameError) as ei:
        parse_spec(src)
    assert ei.value.diagnostics[0].line == 3


def test_primed_safety_rejected():
    src = "SORT Node\nVAR s : SET Node\nINIT s = {}\nSAFETY s' = {}\n"
    with pytest.raises(SpecError):
        parse_spec(src)


def test_name_classes_must_be_disjoint():
    src = "SORT Node\nVAR Node : BOOL\nINIT Node\nSAFETY TRUE\n"
    with pytest.raises(SpecError):
        parse_spec(src)


TOKENS = list("{}()[]\\/=>~#:;,'") + ["SORT", "VAR", "INIT", "ACTION", "SAFETY", "REQUIRE",
                                       "UNCHANGED", "\\A", "\\in", "Node", "s", "n", "BOOL",
                                       "SET", "TRUE", "\n", " ", "\\*", "1"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(TOKENS), max_size=40).map(" ".join))
def test_parse_spec_is_total(text):
    try:
        parse_spec(text)
    except SpecError as e:
        assert e.diagnostics
        for d in e.diagnostics:
            assert d.line >= 0 and d.col >= 0


# parse_clause ----------------------------------------------------------------------------
def test_clause_disjunction_of_two_equalities():
    spec = spec_of("two_phase_commit")
    e = parse_clause("go_abort = {} \\/ go_abort = Node", spec)
    assert isinstance(e, A.Or) and len(e.args) == 2
    assert all(isinstance(x, A.Eq) for x in e.args)


def test_clause_forall_implication():
    spec = spec_of("two_phase_commit")
    e = parse_clause("\\A n \\in Node : n \\in vote_yes => ~(n \\in vote_no)", spec)
    assert isinstance(e, A.Forall) and e.sort == "Node"
    assert isinstance(e.body, A.Implies)


def test_primed_clause_rejected():
    with pytest.raises(PrimedVariableError):
        parse_clause("decide_abort' = {}", spec_of("two_phase_commit"))


def test_clause_must_be_boolean_and_closed():
    spec = spec_of("two_phase_commit")
    with pytest.raises(SpecTypeError):
        parse_clause("vote_yes", spec)
    with pytest.raises(SpecNameError):
        parse_clause("n \\in vote_yes", spec)


def test_element_names_need_an_instance():
    spec = spec_of("two_phase_commit")
    with pytest.raises(SpecNameError):
        parse_clause("n1 \\in alive", spec)
    e = parse_clause("n1 \\in alive", spec, instance=tpc(2))
    assert isinstance(e.elem, A.ElemLit)


def test_empty_set_sort_from_membership():
    e = parse_clause("n1 \\in {}", spec_of("two_phase_commit"), instance=tpc(2))
    assert e.set == A.EmptySet("Node")


# normalize ---------------------------------------------------------------------------
def test_sort_name_reused_as_binder_is_repaired():
    spec = spec_of("two_phase_commit")
    repairs = []
    e = normalize_clause(parse_clause("\\A Node \\in Node : Node \\in alive", spec), spec, repairs)
    assert to_text(e) == "\\A v1 \\in Node : v1 \\in alive"
    assert repairs


def test_constant_reused_as_binder_is_repaired():
    inst = mini()
    spec = inst.spec
    repairs = []
    e = normalize_clause(parse_clause("\\A leader \\in Node : leader \\in a", spec), spec, repairs)
    assert to_text(e) == "\\A v1 \\in Node : v1 \\in a"
    assert len(repairs) == 1


def test_normalize_idempotent_on_canonical_clause():
    spec = spec_of("two_phase_commit")
    e = normalize_clause(parse_clause("go_abort = {} \\/ go_abort = Node", spec), spec)
    assert normalize_clause(e, spec) == e


def test_commutation_has_one_normal_form():
    spec = spec_of("two_phase_commit")
    a = parse_clause("vote_yes = {} \\/ abort_flag", spec)
    b = parse_clause("abort_flag \\/ vote_yes = {}", spec)
    assert canonical_text(a, spec) == canonical_text(b, spec)


def test_alpha_variants_share_normal_form():
    spec = spec_of("two_phase_commit")
    a = parse_clause("\\A n \\in Node : n \\in go_commit => n \\in vote_yes", spec)
    b = parse_clause("\\A x \\in Node : x \\in go_commit => x \\in vote_yes", spec)
    assert normalize_clause(a, spec) == normalize_clause(b, spec)


def test_binder_avoids_element_literal_names():
    inst = mini()
    spec = inst.spec
    e = normalize_clause(parse_clause("\\A n \\in Node : g[n] => m[n] = v1", spec, inst), spec)
    text = to_text(e)
    assert "\\A v1 " not in text
    again = normalize_clause(parse_clause(text, spec, inst), spec)
    assert again == e


# ground -------------------------------------------------------------------------
def test_ground_two_phase_commit_two_nodes():
    inst = tpc(2)
    rep = inst.domain_report()
    assert rep["variables"]["abort_flag"] == 2
    assert all(rep["variables"][n] == 4 for n in SET_VARS)
    # frozen from brute force: product of the per-variable domain sizes: 4^7 * 2
    assert inst.universe_size == 32768 == 2 ** 15
    assert len(list(inst.all_states())) == 32768


def test_ground_rejects_empty_sort():
    with pytest.raises(MissingSort):
        ground(spec_of("two_phase_commit"), InstanceConfig.from_json({"sorts": {"Node": []}}))
    with pytest.raises(MissingSort):
        ground(spec_of("two_phase_commit"), InstanceConfig.from_json({"sorts": {}}))


def test_ground_rejects_duplicate_elements():
    with pytest.raises(InstanceError):
        ground(spec_of("two_phase_commit"), InstanceConfig.from_json({"sorts": {"Node": ["a", "a"]}}))


def test_ground_consensus_bindings():
    from conftest import instance_of
    inst = instance_of("consensus")
    assert len(inst.bindings["Decide"]) == 3
    assert len(inst.bindings["Choose"]) == 2
    assert len(inst.bindings["Send"]) == 6


def test_missing_constant():
    from invsyn.errors import MissingConstant
    with pytest.raises(MissingConstant):
        ground(mini().spec, InstanceConfig.from_json({"sorts": {"Node": ["n1"], "Value": ["v1"]}}))


def test_encode_decode_roundtrip_and_order():
    inst = tpc(2)
    states = list(inst.all_states())
    codes = [inst.encode(s) for s in states]
    assert codes == list(range(len(states)))
    for c in (0, 1, 4111, 32767):
        assert inst.encode(inst.decode(c)) == c
        assert inst.state_from_json(inst.state_to_json(inst.decode(c))) == inst.decode(c)


# templates ---------------------------------------------------------------------
def test_alpha_equivalent_prefixes_merge():
    src = """
    SORT Node
    VAR s : SET Node
    INIT s = {}
    ACTION A { REQUIRE \\A m \\in Node : m \\in s; s' = {}; }
    SAFETY \\A n \\in Node : n \\in s
    """
    ts = extract_quantifier_templates(parse_spec(src))
    assert [t.prefix for t in ts] == [(("forall", "Node"),)]


def test_two_level_server_template():
    src = """
    SORT Server
    VAR up : SET Server
    INIT up = Server
    SAFETY \\A s, t \\in Server : s \\in up => t \\in up
    """
    ts = extract_quantifier_templates(parse_spec(src))
    assert [t.prefix for t in ts] == [(("forall", "Server"), ("forall", "Server"))]
    assert ts[0].render() == "\\A v1 \\in Server : \\A v2 \\in Server : <matrix>"


def test_quantifier_free_spec_has_no_templates():
    src = "SORT Node\nVAR s : SET Node\nINIT s = {}\nSAFETY s # Node\n"
    assert extract_quantifier_templates(parse_spec(src)) == []


@pytest.mark.parametrize("name", ["two_phase_commit", "lockserv", "consensus", "two_phase_commit_mutated"])
def test_templates_pairwise_distinct(name):
    ts = extract_quantifier_templates(spec_of(name))
    assert len({t.prefix for t in ts}) == len(ts)


# properties -----------------------------------------------------------------------
PROPS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@PROPS
@given(clause_texts())
def test_print_parse_round_trip(text):
    inst = mini()
    e = parse_clause(text, inst.spec, inst)
    again = parse_clause(to_text(e), inst.spec, inst)
    assert A.canon_key(again) == A.canon_key(e)


@PROPS
@given(clause_texts())
def test_normalize_idempotent(text):
    inst = mini()
    n = normalize_clause(parse_clause(text, inst.spec, inst), inst.spec)
    assert normalize_clause(n, inst.spec) == n
    reparsed = normalize_clause(parse_clause(to_text(n), inst.spec, inst), inst.spec)
    assert reparsed == n


@PROPS
@given(clause_texts())
def test_normalize_preserves_semantics(text):
    inst = mini()
    e = parse_clause(text, inst.spec, inst)
    n = normalize_clause(e, inst.spec)
    f, g = ev.compile_expr(e, inst), ev.compile_expr(n, inst)
    for s in inst.all_states():
        assert bool(f(s, {})) == bool(g(s, {}))


@PROPS
@given(clause_texts(depth=2), clause_texts(depth=2))
def test_equal_normal_forms_evaluate_equal(x, y):
    inst = mini()
    spec = inst.spec
    a = parse_clause(f"({x}) \\/ ({y})", spec, inst)
    b = parse_clause(f"({y}) \\/ ({x})", spec, inst)
    assert canonical_text(a, spec) == canonical_text(b, spec)
    fa, fb = ev.compile_expr(a, inst), ev.compile_expr(b, inst)
    for s in inst.all_states():
        assert bool(fa(s, {})) == bool(fb(s, {}))


def test_instance_from_helper():
    inst = instance_from("SORT Node\nVAR s : SET Node\nINIT s = {}\nSAFETY TRUE\n", {"Node": ["a"]})
    assert inst.universe_size == 2
