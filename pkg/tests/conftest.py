import pytest

ACCEPTANCE = {}


def record(number, title, ok, detail=""):
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title}"
                                    + (f" ({detail})" if detail else ""))


@pytest.fixture
def acceptance_record():
    return record
