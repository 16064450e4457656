import pytest

from isac_evd.system_model import calibrated_config_path, load_config

# filled by the acceptance tests, printed at the end of the session
_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def calibrated():
    return load_config(calibrated_config_path())


@pytest.fixture
def acceptance():
    def record(key, ok, detail):
        _ACCEPTANCE[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def _order(key):
    num = "".join(ch for ch in key if ch.isdigit())
    return (int(num) if num else 0, key)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=_order):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3s} {'PASS' if ok else 'FAIL'}  {detail}")
