import os

import hypothesis
import pytest

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance criterion id -> (passed, one-line detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FEDNORMEC_OUTPUT_ROOT", str(tmp_path / "runs"))
    return tmp_path / "runs"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
