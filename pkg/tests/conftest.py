import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one of the eleven acceptance criteria")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> (passed, one-line detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {text}")
