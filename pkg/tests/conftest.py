from __future__ import annotations

import socket
import sys
from functools import lru_cache
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
BENCH = ROOT / "benchmarks"
sys.path.insert(0, str(Path(__file__).resolve().parent))

from invsyn.lang import InstanceConfig, ground, parse_spec  # noqa: E402

# Lines collected by the acceptance suite, echoed in the terminal summary.
CRITERIA: list[str] = []


class NetworkBlocked(RuntimeError):
    pass


def _refuse(*a, **k):
    raise NetworkBlocked("tests may not open network connections")


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Any attempt to connect anywhere fails loudly."""
    monkeypatch.setattr(socket.socket, "connect", _refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", _refuse)
    monkeypatch.setattr(socket, "create_connection", _refuse)
    monkeypatch.setattr(socket, "getaddrinfo", _refuse)


@lru_cache(maxsize=None)
def spec_of(name: str):
    return parse_spec((BENCH / f"{name}.spec").read_text())


@lru_cache(maxsize=None)
def instance_of(spec_name: str, cfg_name: str | None = None):
    cfg = InstanceConfig.from_json(BENCH / f"{cfg_name or spec_name}.json")
    return ground(spec_of(spec_name), cfg)


def tpc(n: int = 2):
    return instance_of("two_phase_commit", "two_phase_commit_n2" if n == 2 else "two_phase_commit")


def instance_from(text: str, sorts: dict):
    return ground(parse_spec(text), InstanceConfig.from_json({"sorts": sorts}))


@lru_cache(maxsize=None)
def oracle_for(spec_name: str, cfg_name: str | None = None):
    from oracle import Oracle
    return Oracle(instance_of(spec_name, cfg_name))


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
