from __future__ import annotations

import json
import socket
from pathlib import Path

import httpx
import pytest

from conftest import BENCH, NetworkBlocked, instance_from, instance_of, tpc
from invsyn import evaluator as ev
from invsyn.controller import ClauseMemory, SynthConfig, synthesize
from invsyn.errors import NoParsableArray, ProposerUnavailable
from invsyn.lang import normalize_clause, parse_clause, to_text
from invsyn.proposer import (
    API_KEY_ENV,
    NullProposer,
    ProposalContext,
    RecordingProposer,
    RemoteConfig,
    RemoteProposer,
    ReplayProposer,
    TemplateProposer,
    build_prompt,
    parse_response,
    read_transcript,
    record_observation,
)

HERE = Path(__file__).resolve().parent
FIX = HERE / "fixtures"
BAD = {"vote_yes": [], "vote_no": [], "alive": ["n1"], "go_commit": [], "go_abort": ["n1"],
       "decide_commit": [], "decide_abort": [], "abort_flag": False}


def fixture_context() -> ProposalContext:
    d = json.loads((FIX / "prompt_context.json").read_text())
    return ProposalContext(
        spec_text=(BENCH / d["spec_file"]).read_text(),
        bad_states=tuple(d["bad_states"]),
        templates=tuple(d["templates"]),
        existing_clauses=tuple(d["existing_clauses"]),
        known_true=tuple(d["known_true"]),
        known_false=tuple(tuple(x) for x in d["known_false"]),
    )


def ctx_for(inst, states, **kw):
    return ProposalContext(spec_text="", bad_states=tuple(json.dumps(inst.state_to_json(s), sort_keys=True)
                                                         for s in states), **kw)


def form(inst, text):
    return to_text(normalize_clause(parse_clause(text, inst.spec, inst), inst.spec))


# prompt --------------------------------------------------------------------------------
def test_prompt_matches_golden_file():
    assert build_prompt(fixture_context()) == (HERE / "golden" / "prompt.txt").read_text()


def test_prompt_marks_empty_sections():
    ctx = ProposalContext(spec_text="SORT S\n", bad_states=("{}",))
    text = build_prompt(ctx)
    assert "Existing clauses:\n(none)" in text
    assert "Known false on finite reachable states:\n(none)" in text
    assert text.endswith('[{"clause_name": "...", "clause": "TLA+ expr"}]\n')


def test_context_needs_a_bad_state():
    with pytest.raises(ValueError):
        ProposalContext(spec_text="", bad_states=())


# response parsing ----------------------------------------------------------------------
def test_fixture_response_yields_exactly_the_valid_clauses():
    inst = tpc(2)
    batch = parse_response((FIX / "response_one_malformed.txt").read_text(), inst.spec, instance=inst)
    assert [it.name for it in batch.items] == ["go_abort_needs_flag", "commit_implies_yes", "abort_decided"]
    assert [it.text for it in batch.items] == [
        form(inst, "go_abort # {} => abort_flag"),
        form(inst, "\\A n \\in Node : n \\in go_commit => n \\in vote_yes"),
        form(inst, "\\A n \\in Node : n \\in decide_abort => n \\in vote_no \\/ n \\in go_abort"),
    ]
    assert len(batch.diagnostics) == 1 and "entry 2" in batch.diagnostics[0].message


def test_fenced_array_with_two_clauses():
    inst = tpc(2)
    raw = 'ok\n```json\n[{"clause_name":"a","clause":"vote_no = {}"},{"clause_name":"b","clause":"abort_flag"}]\n```'
    batch = parse_response(raw, inst.spec)
    assert [it.text for it in batch.items] == ["{} = vote_no", "abort_flag"]
    assert batch.diagnostics == []


def test_primed_clause_dropped():
    inst = tpc(2)
    batch = parse_response('[{"clause_name":"p","clause":"abort_flag\' = TRUE"},'
                           '{"clause_name":"q","clause":"abort_flag"}]', inst.spec)
    assert [it.name for it in batch.items] == ["q"]
    assert batch.diagnostics and batch.diagnostics[0].kind == "PrimedVariableError"


def test_binder_reusing_a_variable_name_is_repaired():
    inst = tpc(2)
    batch = parse_response('[{"clause_name":"r","clause":"\\\\A alive \\\\in Node : alive \\\\in go_commit => alive \\\\in vote_yes"}]',
                           inst.spec)
    assert [it.text for it in batch.items] == [form(inst, "\\A n \\in Node : n \\in go_commit => n \\in vote_yes")]
    assert [d.kind for d in batch.diagnostics] == ["ScopeRepair"]


def test_entries_without_clause_text_are_malformed():
    inst = tpc(2)
    batch = parse_response('[{"clause_name":"x"}, 7, {"clause": "abort_flag"}]', inst.spec)
    assert [it.name for it in batch.items] == ["clause_2"]
    assert [d.kind for d in batch.diagnostics] == ["MalformedEntry", "MalformedEntry"]


def test_no_array():
    inst = tpc(2)
    assert parse_response("I cannot help with that.", inst.spec).items == []
    with pytest.raises(NoParsableArray):
        parse_response("I cannot help with that.", inst.spec, strict=True)


def test_duplicates_by_normal_form_and_name_collisions():
    inst = tpc(2)
    raw = json.dumps([{"clause_name": "a", "clause": "vote_no = {} \\/ abort_flag"},
                      {"clause_name": "b", "clause": "abort_flag \\/ {} = vote_no"},
                      {"clause_name": "a", "clause": "abort_flag"}])
    batch = parse_response(raw, inst.spec)
    assert [it.name for it in batch.items] == ["a", "a_2"]
    assert [d.kind for d in batch.diagnostics] == ["Duplicate"]


def test_element_names_need_the_instance():
    inst = tpc(2)
    raw = '[{"clause_name":"e","clause":"n1 \\\\in alive"}]'
    assert parse_response(raw, inst.spec).items == []
    assert len(parse_response(raw, inst.spec, instance=inst).items) == 1


# template proposer ------------------------------------------------------------------------
def test_template_batch_blocks_the_bad_state():
    inst = tpc(2)
    bad = inst.state_from_json(BAD)
    assert 1 <= len(TemplateProposer(inst).propose(ctx_for(inst, [bad]))) <= 15
    batch = TemplateProposer(inst, cap=1000).propose(ctx_for(inst, [bad]))
    texts = [it.text for it in batch.items]
    assert form(inst, "go_abort = {} \\/ go_abort = Node") in texts
    assert all(not ev.holds(it.expr, bad, inst) for it in batch.items)


def test_template_skips_known_clauses():
    inst = tpc(2)
    bad = inst.state_from_json(BAD)
    tp = TemplateProposer(inst)
    first = tp.propose(ctx_for(inst, [bad]))
    known = first.items[0].text
    again = tp.propose(ctx_for(inst, [bad], existing_clauses=(known,)))
    assert known not in [it.text for it in again.items]


def test_template_is_deterministic():
    inst = tpc(2)
    bad = inst.state_from_json(BAD)
    a = TemplateProposer(inst).propose(ctx_for(inst, [bad]))
    b = TemplateProposer(inst).propose(ctx_for(inst, [bad]))
    assert a.raw == b.raw and a.items == b.items


def test_template_zero_budget_is_empty():
    inst = tpc(2)
    ctx = ctx_for(inst, [inst.state_from_json(BAD)])
    assert len(TemplateProposer(inst, budget=0).propose(ctx)) == 0
    assert len(TemplateProposer(inst, cap=0).propose(ctx)) == 0


def test_template_on_a_single_boolean_spec():
    inst = instance_from("SORT S\nVAR f : BOOL\nINIT ~f\nACTION T { f' = TRUE; }\nSAFETY TRUE\n",
                         {"S": ["s1"]})
    batch = TemplateProposer(inst).propose(ctx_for(inst, [inst.state_from_json({"f": True})]))
    assert [it.text for it in batch.items] == ["~f"]


def test_template_raw_round_trips_through_the_parser():
    inst = tpc(2)
    batch = TemplateProposer(inst).propose(ctx_for(inst, [inst.state_from_json(BAD)]))
    again = parse_response(batch.raw, inst.spec, strict=True, instance=inst)
    assert [it.text for it in again.items] == [it.text for it in batch.items]


# observations, null ------------------------------------------------------------------------
def test_record_observation():
    inst = tpc(2)
    mem = ClauseMemory()
    cl, _ = mem.add("x", normalize_clause(parse_clause("abort_flag", inst.spec), inst.spec), "template")
    record_observation(mem, cl, True)
    record_observation(mem, cl.id, False, '{"abort_flag": false}')
    assert cl.observations == [(True, None), (False, '{"abort_flag": false}')]
    with pytest.raises(ValueError):
        record_observation(mem, cl, True, "{}")
    with pytest.raises(KeyError):
        record_observation(mem, 999, True)


def test_null_proposes_nothing():
    assert len(NullProposer().propose(ProposalContext(spec_text="", bad_states=("{}",)))) == 0


# remote -------------------------------------------------------------------------------------
def _reply(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_remote_sends_bearer_from_env_and_records(tmp_path, monkeypatch):
    inst = tpc(2)
    monkeypatch.setenv(API_KEY_ENV, "sk-test")
    seen = []

    def handler(request):
        seen.append(request)
        return _reply('[{"clause_name":"f","clause":"go_abort # {} => abort_flag"}]')

    t = tmp_path / "t.jsonl"
    rp = RemoteProposer(inst.spec, RemoteConfig(endpoint="https://proposer.invalid/v1/chat"),
                        transcript=str(t), transport=httpx.MockTransport(handler), instance=inst)
    ctx = fixture_context()
    batch = rp.propose(ctx)
    assert [it.name for it in batch.items] == ["f"]
    assert seen[0].headers["authorization"] == "Bearer sk-test"
    body = json.loads(seen[0].content)
    assert body["messages"] == [{"role": "user", "content": build_prompt(ctx)}]
    rec = read_transcript(t)
    assert len(rec) == 1 and rec[0]["proposer"] == "remote" and rec[0]["prompt"] == build_prompt(ctx)


def test_remote_retries_transport_errors(monkeypatch):
    inst = tpc(2)
    monkeypatch.setenv(API_KEY_ENV, "k")
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            raise httpx.ConnectError("down", request=request)
        return _reply("[]")

    rp = RemoteProposer(inst.spec, RemoteConfig(endpoint="https://x.invalid", retries=2),
                        transport=httpx.MockTransport(handler))
    assert len(rp.propose(fixture_context())) == 0 and len(attempts) == 3


def test_remote_gives_up_after_retries(monkeypatch):
    inst = tpc(2)
    monkeypatch.setenv(API_KEY_ENV, "k")

    def handler(request):
        raise httpx.ConnectError("down", request=request)

    rp = RemoteProposer(inst.spec, RemoteConfig(endpoint="https://x.invalid", retries=1),
                        transport=httpx.MockTransport(handler))
    with pytest.raises(ProposerUnavailable):
        rp.propose(fixture_context())


def test_remote_needs_key_and_endpoint(monkeypatch):
    inst = tpc(2)
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    transport = httpx.MockTransport(lambda r: _reply("[]"))
    with pytest.raises(ProposerUnavailable, match=API_KEY_ENV):
        RemoteProposer(inst.spec, RemoteConfig(endpoint="https://x.invalid"), transport=transport).propose(
            fixture_context())
    monkeypatch.setenv(API_KEY_ENV, "k")
    with pytest.raises(ProposerUnavailable, match="endpoint"):
        RemoteProposer(inst.spec, RemoteConfig(), transport=transport).propose(fixture_context())


def test_remote_bad_status_is_unavailable(monkeypatch):
    inst = tpc(2)
    monkeypatch.setenv(API_KEY_ENV, "k")
    rp = RemoteProposer(inst.spec, RemoteConfig(endpoint="https://x.invalid"),
                        transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(ProposerUnavailable):
        rp.propose(fixture_context())


def test_remote_without_mock_never_reaches_the_network(monkeypatch):
    inst = tpc(2)
    monkeypatch.setenv(API_KEY_ENV, "k")
    rp = RemoteProposer(inst.spec, RemoteConfig(endpoint="https://127.0.0.1:9/v1", retries=0))
    with pytest.raises((ProposerUnavailable, NetworkBlocked)):
        rp.propose(fixture_context())


# replay -------------------------------------------------------------------------------------
def test_replay_reproduces_the_recorded_run():
    inst = tpc(2)
    spec_text = (BENCH / "two_phase_commit.spec").read_text()
    live = synthesize(inst, TemplateProposer(inst), spec_text=spec_text)
    rp = ReplayProposer(inst.spec, FIX / "tpc_n2_transcript.jsonl", instance=inst)
    replayed = synthesize(inst, rp, spec_text=spec_text)
    assert rp.mismatches == 0 and rp.calls == len(rp.records)
    assert replayed.verdict == live.verdict
    assert [(c.name, c.text, c.provenance) for c in replayed.invariant] == \
        [(c.name, c.text, c.provenance) for c in live.invariant]
    assert replayed.stats == live.stats


def test_recording_wrapper_writes_one_line_per_call(tmp_path):
    inst = tpc(2)
    t = tmp_path / "rec.jsonl"
    inner = TemplateProposer(inst)
    rec = RecordingProposer(inner, t)
    ctx = ctx_for(inst, [inst.state_from_json(BAD)])
    batch = rec.propose(ctx)
    rec.propose(ctx)
    lines = read_transcript(t)
    assert [r["call"] for r in lines] == [1, 2]
    assert lines[0]["response"] == batch.raw and lines[0]["proposer"] == "template"


def test_exhausted_replay_is_empty(tmp_path):
    inst = tpc(2)
    t = tmp_path / "one.jsonl"
    t.write_text(json.dumps({"call": 1, "response": '[{"clause_name":"a","clause":"abort_flag"}]'}) + "\n")
    rp = ReplayProposer(inst.spec, t)
    ctx = ctx_for(inst, [inst.state_from_json(BAD)])
    assert len(rp.propose(ctx)) == 1 and len(rp.propose(ctx)) == 0
    assert rp.kind == "replay"


# offline paths ------------------------------------------------------------------------------
def test_offline_proposers_open_no_connections(monkeypatch):
    attempts = []

    def spy(*a, **k):
        attempts.append(a)
        raise NetworkBlocked("blocked")

    monkeypatch.setattr(socket.socket, "connect", spy)
    monkeypatch.setattr(socket, "create_connection", spy)
    monkeypatch.setattr(socket, "getaddrinfo", spy)
    inst = tpc(2)
    synthesize(inst, TemplateProposer(inst))
    mutated = instance_of("two_phase_commit_mutated", "two_phase_commit_n2")
    assert synthesize(mutated, NullProposer(), SynthConfig(timeout_secs=60)).verdict == "unsafe"
    assert attempts == []
