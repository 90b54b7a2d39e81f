import pytest

from polarml.dataset import load_table
from polarml.fixtures import data_path, make_nonlinear

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id, title): exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    cid, title = mark.args
    ok, _ = _ACCEPTANCE.get(cid, (True, title))
    _ACCEPTANCE[cid] = (ok and not rep.failed, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c.lstrip("AC"))):
        ok, title = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {title}")


@pytest.fixture(scope="session")
def panel():
    return load_table(data_path("panel"))


@pytest.fixture(scope="session")
def future():
    return load_table(data_path("future"), labels_expected=False)


@pytest.fixture(scope="session")
def nonlinear():
    return make_nonlinear()[0]
