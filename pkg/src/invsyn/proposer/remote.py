"""Remote chat-completion proposer, transcript recording and replay."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..errors import ProposerUnavailable
from .base import ProposalBatch, ProposalContext
from .prompt import build_prompt, parse_response

log = logging.getLogger(__name__)

API_KEY_ENV = "INVSYN_LLM_API_KEY"


@dataclass
class RemoteConfig:
    endpoint: Optional[str] = None
    model: str = "default"
    temperature: float = 0.0
    timeout_secs: float = 120.0
    retries: int = 2


def _append_jsonl(path, record: dict):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


class RemoteProposer:
    """POSTs the built prompt as a single user message to a chat-completion endpoint."""

    kind = "remote"

    def __init__(self, spec, config: Optional[RemoteConfig] = None, transcript: Optional[str] = None,
                 transport=None, instance=None):
        self.spec = spec
        self.instance = instance
        self.config = config or RemoteConfig()
        self.transcript = transcript
        self._transport = transport
        self.calls = 0

    def _client(self):
        import httpx
        if not self.config.endpoint:
            raise ProposerUnavailable("no proposer endpoint configured")
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise ProposerUnavailable(f"environment variable {API_KEY_ENV} is not set")
        return httpx.Client(timeout=self.config.timeout_secs, transport=self._transport,
                            headers={"Authorization": f"Bearer {key}"})

    def request_body(self, prompt: str) -> dict:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }

    def complete(self, prompt: str) -> str:
        import httpx
        body = self.request_body(prompt)
        last = None
        with self._client() as client:
            for attempt in range(self.config.retries + 1):
                try:
                    resp = client.post(self.config.endpoint, json=body)
                    resp.raise_for_status()
                    data = resp.json()
                    return data["choices"][0]["message"]["content"]
                except httpx.TransportError as e:
                    last = e
                    log.warning("proposer transport error (attempt %d): %s", attempt + 1, e)
                except (httpx.HTTPStatusError, ValueError, KeyError, IndexError, TypeError) as e:
                    raise ProposerUnavailable(f"bad response from endpoint: {e}") from e
        raise ProposerUnavailable(f"endpoint unreachable after {self.config.retries + 1} attempts: {last}")

    def propose(self, ctx: ProposalContext) -> ProposalBatch:
        prompt = build_prompt(ctx)
        self.calls += 1
        raw = self.complete(prompt)
        if self.transcript:
            _append_jsonl(self.transcript, {"call": self.calls, "proposer": self.kind, "prompt": prompt,
                                            "request": self.request_body(prompt), "response": raw})
        return parse_response(raw, self.spec, instance=self.instance)


def read_transcript(path) -> list:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


class ReplayProposer:
    """Feeds recorded responses back in call order.

    Clauses keep the provenance of the recorded session, so a replayed run
    reproduces the original result exactly.
    """

    def __init__(self, spec, transcript, instance=None):
        self.spec = spec
        self.instance = instance
        self.records = read_transcript(transcript)
        self.kind = next((r["proposer"] for r in self.records if r.get("proposer")), "replay")
        self.calls = 0
        self.mismatches = 0

    def propose(self, ctx: ProposalContext) -> ProposalBatch:
        if self.calls >= len(self.records):
            self.calls += 1
            log.warning("transcript exhausted after %d responses", len(self.records))
            return ProposalBatch()
        rec = self.records[self.calls]
        self.calls += 1
        if "prompt" in rec and rec["prompt"] != build_prompt(ctx):
            self.mismatches += 1
            log.warning("replayed call %d was recorded for a different prompt", self.calls)
        return parse_response(rec["response"], self.spec, instance=self.instance)


class RecordingProposer:
    """Wraps another proposer and appends each prompt/response pair to a transcript."""

    def __init__(self, inner, transcript):
        self.inner = inner
        self.kind = inner.kind
        self.transcript = transcript
        self.calls = 0

    def propose(self, ctx: ProposalContext) -> ProposalBatch:
        batch = self.inner.propose(ctx)
        self.calls += 1
        if not isinstance(self.inner, RemoteProposer) or not self.inner.transcript:
            _append_jsonl(self.transcript, {"call": self.calls, "proposer": self.kind,
                                            "prompt": build_prompt(ctx),
                                            "response": batch.raw})
        return batch
