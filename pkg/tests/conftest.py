from pathlib import Path

import pytest

from tyflow.language import parse_language
from tyflow.languages import load_builtin

FIXTURES = Path(__file__).parent / "fixtures"

ID_APP_PROMPT = (
    "Implement an identity function that takes a boolean input and returns the same value; "
    "then apply it to the value true."
)
ID_APP_PROGRAM = "(app (abs x bool (var x)) true)"
ID_APP_TOKENS = "R:T-ROOT R:T-APP R:T-ABS R:T-VAR N:x K:bool N:x K:bool R:T-TRUE"


@pytest.fixture(scope="session")
def stlc():
    return load_builtin("stlc")


@pytest.fixture(scope="session")
def ext():
    return load_builtin("stlc-ext")


@pytest.fixture(scope="session")
def acq():
    return parse_language((FIXTURES / "acquire.lang").read_text())


# Acceptance results, one line per criterion, printed after the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
