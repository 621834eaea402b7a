import pytest

# criterion id -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda s: (int("".join(filter(str.isdigit, s))), s)):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def _report(cid, ok, detail):
        ACCEPTANCE[cid] = (bool(ok), detail)
        with capsys.disabled():
            print(f"\ncriterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)
    return _report
