import warnings

import pytest

from ceitcool.model import LambDickeWarning

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def report(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_lamb_dicke():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LambDickeWarning)
        yield
