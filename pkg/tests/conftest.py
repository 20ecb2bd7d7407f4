"""Shared fixtures: memoized full-length training runs and the acceptance summary."""

import dataclasses

import pytest

from pulsepinn import artifacts
from pulsepinn.config import RunConfig
from pulsepinn.trainer import train

ACCEPTANCE = {}


class RunCache:
    """Trains each distinct configuration once per session and keeps its run directory."""

    def __init__(self, root):
        self.root = root
        self.runs = {}

    def __call__(self, **overrides):
        cfg = RunConfig(**overrides)
        key = tuple(sorted(dataclasses.asdict(cfg).items(), key=lambda kv: kv[0]))
        key = repr(key)
        if key not in self.runs:
            record = train(cfg)
            out = self.root / f"run{len(self.runs):02d}"
            artifacts.write_run(record, out)
            self.runs[key] = (record, out)
        return self.runs[key]


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    return RunCache(tmp_path_factory.mktemp("trained"))


def record_criterion(number, title, passed, detail):
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")


@pytest.fixture
def criterion(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print()
            record_criterion(number, title, passed, detail)
        assert passed, f"criterion {number} failed: {detail}"
    return emit


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number}. {title}: {detail}")
