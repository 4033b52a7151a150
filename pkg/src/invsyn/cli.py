"""Command-line entry point: synthesize, check, minimize, reach."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from . import explorer
from .controller import (
    SAFETY,
    Clause,
    SynthConfig,
    dumps,
    minimize_invariant,
    result_to_json,
    synthesize,
)
from .errors import (
    InvsynError,
    NotInductiveInput,
    QueryBudgetExceeded,
    SpecError,
    SynthesisTimeout,
)
from .lang import ground, normalize_clause, parse_clause, parse_spec, to_text
from .lang.ground import InstanceConfig
from .proposer import (
    API_KEY_ENV,
    NullProposer,
    RecordingProposer,
    RemoteConfig,
    RemoteProposer,
    ReplayProposer,
    TemplateProposer,
)
from .witness import DEFAULT_QUERY_CAP, Engine

log = logging.getLogger("invsyn")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BUDGET = 2
EXIT_INPUT = 3

PROPOSERS = ("template", "null", "remote", "replay")


class UsageError(InvsynError):
    """Bad command-line or config input."""


@dataclass
class RunConfig:
    spec: Optional[str] = None
    instance: Optional[str] = None
    proposer: str = "template"
    transcript: Optional[str] = None
    timeout_secs: float = 600.0
    query_cap: int = DEFAULT_QUERY_CAP
    reach_max_states: Optional[int] = None
    reach_max_depth: Optional[int] = None
    learn_rounds: int = 3
    batch_cap: int = 16
    retries: int = 2
    endpoint: Optional[str] = None
    model: str = "default"
    out: Optional[str] = None
    minimize: bool = False
    emit_prompt_transcripts: bool = False
    invariant: Optional[str] = None

    def validate(self):
        if not self.spec or not self.instance:
            raise UsageError("--spec and --instance are required")
        if self.proposer not in PROPOSERS:
            raise UsageError(f"unknown proposer {self.proposer!r}")
        if self.proposer == "replay" and not self.transcript:
            raise UsageError("the replay proposer needs --transcript")
        for name in ("timeout_secs", "query_cap", "learn_rounds", "batch_cap"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        for name in ("reach_max_states", "reach_max_depth"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise UsageError(f"{name} must be positive")
        if self.retries < 0:
            raise UsageError("retries must be non-negative")

    def synth_config(self) -> SynthConfig:
        return SynthConfig(timeout_secs=self.timeout_secs, query_cap=self.query_cap,
                           learn_rounds=self.learn_rounds, batch_cap=self.batch_cap,
                           reach_max_states=self.reach_max_states,
                           reach_max_depth=self.reach_max_depth)


_FIELDS = {f.name for f in fields(RunConfig)}


def load_config(args) -> RunConfig:
    """JSON config file first, then any flag the user actually passed."""
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - _FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for k in _FIELDS:
        v = getattr(args, k, None)
        if v is not None:
            data[k] = v
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg


# loading -------------------------------------------------------------------------
def _read(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {what} {path}: {e.strerror or e}") from None


def load_instance(cfg: RunConfig):
    spec = parse_spec(_read(cfg.spec, "spec"))
    data = _read(cfg.instance, "instance config")
    try:
        icfg = InstanceConfig.from_json(json.loads(data))
    except ValueError as e:
        raise UsageError(f"instance config {cfg.instance} is not valid JSON: {e}") from None
    return ground(spec, icfg)


def read_invariant(path, instance) -> list[Clause]:
    """Parse a clause file: one `name :: text` (or bare text) per line, '#' comments."""
    spec = instance.spec
    safety = {to_text(normalize_clause(c, spec)) for c in spec.safety_conjuncts}
    out = []
    for lineno, line in enumerate(_read(path, "invariant").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, text = line.partition("::")
        if not sep:
            name, text = f"clause_{lineno}", line
        name, text = name.strip(), text.strip()
        try:
            body = normalize_clause(parse_clause(text, spec, instance=instance), spec)
        except SpecError as e:
            raise UsageError(f"{path}:{lineno}: {e}") from None
        prov = SAFETY if to_text(body) in safety else "input"
        out.append(Clause(len(out), name, body, prov))
    return out


def format_invariant(clauses) -> str:
    return "".join(f"{c.name} :: {c.text}\n" for c in clauses)


def make_proposer(cfg: RunConfig, instance, out_dir: Optional[Path]):
    if cfg.proposer == "template":
        p = TemplateProposer(instance)
    elif cfg.proposer == "null":
        p = NullProposer()
    elif cfg.proposer == "replay":
        if not Path(cfg.transcript).is_file():
            raise UsageError(f"transcript {cfg.transcript} not found")
        p = ReplayProposer(instance.spec, cfg.transcript, instance=instance)
    else:
        if not cfg.endpoint:
            raise UsageError("the remote proposer needs an endpoint (config key 'endpoint')")
        if not os.environ.get(API_KEY_ENV):
            raise UsageError(f"the remote proposer needs {API_KEY_ENV} in the environment")
        rc = RemoteConfig(endpoint=cfg.endpoint, model=cfg.model,
                          timeout_secs=min(cfg.timeout_secs, 120.0), retries=cfg.retries)
        transcript = None
        if cfg.emit_prompt_transcripts and out_dir is not None:
            transcript = str(out_dir / "transcript.jsonl")
        return RemoteProposer(instance.spec, rc, transcript=transcript, instance=instance)
    if cfg.emit_prompt_transcripts and out_dir is not None:
        p = RecordingProposer(p, str(out_dir / "transcript.jsonl"))
    return p


# reports --------------------------------------------------------------------------------
def _state_line(instance, state) -> str:
    return instance.state_text(state)


def report_text(report: dict) -> str:
    lines = [f"verdict: {report['verdict']}"]
    st = report.get("stats", {})
    for k in sorted(st):
        if k != "queries":
            lines.append(f"{k}: {st[k]}")
    if "queries" in st:
        lines.append("queries: " + ", ".join(f"{k}={v}" for k, v in sorted(st["queries"].items())))
    if report["verdict"] == "invariant":
        lines.append(f"fixpoint frame: {report['fixpoint']}")
        lines.append(f"invariant ({len(report['invariant'])} clauses):")
        lines += [f"  {c['name']} :: {c['clause']}" for c in report["invariant"]]
        if "minimized" in report:
            m = report["minimized"]
            lines.append(f"minimized: {len(m['invariant'])} clauses, removed {len(m['removed'])}")
            lines += [f"  removed {n}" for n in m["removed"]]
    elif report["verdict"] == "unsafe":
        lines.append(f"trace ({len(report['trace'])} states):")
        for k, step in enumerate(report["trace"]):
            act = step["action"] or "<init>"
            lines.append(f"  {k}: {act} -> {json.dumps(step['state'], sort_keys=True)}")
    else:
        lines.append(f"reason: {report.get('reason', '')}")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# commands -------------------------------------------------------------------------
def cmd_synthesize(cfg: RunConfig) -> int:
    inst = load_instance(cfg)
    out_dir = Path(cfg.out) if cfg.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "transcript.jsonl").unlink(missing_ok=True)
    proposer = make_proposer(cfg, inst, out_dir)
    start = time.monotonic()
    code = EXIT_OK
    try:
        result = synthesize(inst, proposer, cfg.synth_config())
    except SynthesisTimeout as e:
        report = {"verdict": "timeout", "reason": str(e), "partial": e.partial}
        code = EXIT_BUDGET
    except QueryBudgetExceeded as e:
        report = {"verdict": "budget", "reason": str(e)}
        code = EXIT_BUDGET
    else:
        report = result_to_json(result, inst)
        report["proposer"] = cfg.proposer
        if result.verdict == "unsafe":
            code = EXIT_FAIL
        elif cfg.minimize:
            kept, removed = minimize_invariant(result.invariant, inst)
            report["minimized"] = {"invariant": [{"name": c.name, "clause": c.text} for c in kept],
                                   "removed": [c.name for c in removed]}
            result.invariant = kept
    elapsed = time.monotonic() - start
    print(f"wall time: {elapsed:.2f}s", file=sys.stderr)

    text = report_text(report)
    if out_dir is not None:
        _write(out_dir / "report.json", dumps(report))
        _write(out_dir / "report.txt", text)
        if report["verdict"] == "invariant":
            _write(out_dir / "invariant.txt", format_invariant(result.invariant))
        if report["verdict"] == "unsafe":
            _write(out_dir / "trace.json", dumps(report["trace"]))
    sys.stdout.write(text)
    return code


def _condition_lines(inst, name, cond, clauses) -> list[str]:
    if cond.ok:
        return [f"{name}: PASS"]
    lines = [f"{name}: FAIL"]
    if cond.clause is not None:
        c = clauses[cond.clause]
        lines.append(f"  clause: {c.name} :: {c.text}")
    if cond.label is not None:
        lines.append(f"  action: {cond.label}")
    if cond.pre is not None:
        lines.append(f"  pre:  {_state_line(inst, cond.pre)}")
    if cond.post is not None:
        lines.append(f"  post: {_state_line(inst, cond.post)}")
    return lines


def cmd_check(cfg: RunConfig, invariant_path: Optional[str] = None) -> int:
    path = invariant_path or cfg.invariant
    if not path:
        raise UsageError("check needs --invariant")
    inst = load_instance(cfg)
    clauses = read_invariant(path, inst)
    rep = Engine(inst, cfg.query_cap).check_invariant([c.body for c in clauses])
    lines = []
    lines += _condition_lines(inst, "initiation", rep.initiation, clauses)
    lines += _condition_lines(inst, "consecution", rep.consecution, clauses)
    for k, r in rep.failing_clauses:
        if k != rep.consecution.clause:
            lines += ["  also fails consecution:"] + [
                "  " + s for s in _condition_lines(inst, "clause", r, clauses)[1:]]
    lines += _condition_lines(inst, "safety", rep.safety, clauses)
    lines.append("inductive invariant: " + ("YES" if rep.ok else "NO"))
    text = "\n".join(lines) + "\n"
    if cfg.out:
        _write(Path(cfg.out), text)
    sys.stdout.write(text)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_minimize(cfg: RunConfig, invariant_path: Optional[str] = None) -> int:
    path = invariant_path or cfg.invariant
    if not path:
        raise UsageError("minimize needs --invariant")
    inst = load_instance(cfg)
    clauses = read_invariant(path, inst)
    try:
        kept, removed = minimize_invariant(clauses, inst, Engine(inst, cfg.query_cap))
    except NotInductiveInput as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    text = format_invariant(kept)
    if cfg.out:
        _write(Path(cfg.out), text)
    else:
        sys.stdout.write(text)
    print(f"removed {len(removed)} clause(s): {', '.join(c.name for c in removed) or '-'}",
          file=sys.stderr)
    return EXIT_OK


def cmd_reach(cfg: RunConfig) -> int:
    inst = load_instance(cfg)
    rs = explorer.reachable(inst, cfg.reach_max_states, cfg.reach_max_depth)
    rep = rs.report()
    text = json.dumps(rep, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        _write(Path(cfg.out), text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "check": cmd_check,
    "minimize": cmd_minimize,
    "reach": cmd_reach,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="invsyn", description="Inductive invariant synthesis "
                                 "for finite instances of guarded-command protocol specs.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
        p.add_argument("--spec")
        p.add_argument("--instance")
        p.add_argument("--query-cap", dest="query_cap", type=int)
        p.add_argument("--out")

    s = sub.add_parser("synthesize", help="run the synthesis loop")
    common(s)
    s.add_argument("--proposer", choices=PROPOSERS)
    s.add_argument("--transcript")
    s.add_argument("--timeout-secs", dest="timeout_secs", type=float)
    s.add_argument("--reach-max-states", dest="reach_max_states", type=int)
    s.add_argument("--reach-max-depth", dest="reach_max_depth", type=int)
    s.add_argument("--learn-rounds", dest="learn_rounds", type=int)
    s.add_argument("--batch-cap", dest="batch_cap", type=int)
    s.add_argument("--retries", type=int)
    s.add_argument("--endpoint")
    s.add_argument("--model")
    s.add_argument("--minimize", action="store_const", const=True)
    s.add_argument("--emit-prompt-transcripts", dest="emit_prompt_transcripts",
                   action="store_const", const=True)

    for name, help_ in (("check", "check Init, consecution and Safety for a clause file"),
                        ("minimize", "drop redundant clauses from an inductive invariant")):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--invariant", required=False)

    r = sub.add_parser("reach", help="explicit-state reachability report")
    common(r)
    r.add_argument("--reach-max-states", dest="reach_max_states", type=int)
    r.add_argument("--reach-max-depth", dest="reach_max_depth", type=int)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (SpecError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InvsynError as e:
        # instance errors and other input-level diagnostics
        if isinstance(e, QueryBudgetExceeded):
            print(f"budget: {e}", file=sys.stderr)
            return EXIT_BUDGET
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
