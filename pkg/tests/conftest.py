import pytest
from hypothesis import settings

settings.register_profile("bellcv", deadline=None)
settings.load_profile("bellcv")

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, text): acceptance criterion number and summary")


@pytest.fixture(autouse=True)
def _isolated_cache_dir(tmp_path, monkeypatch):
    # keep tests from reading or writing a user-level kernel cache
    monkeypatch.setenv("BELLCV_CACHE_DIR", str(tmp_path / "cache"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    k, text = mark.args
    entry = _CRITERIA.setdefault(k, {"text": text, "ok": True, "tests": 0})
    if rep.failed:
        entry["ok"] = False
    if rep.when == "call":
        entry["tests"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        e = _CRITERIA[k]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {k}: {e['text']} ({e['tests']} checks)")
