import pytest

_RESULTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    printed = [ln for ln in rep.capstdout.splitlines() if ln.startswith(f"criterion {number}:")]
    detail = printed[-1].split("  ", 1)[-1] if printed else title
    _RESULTS.setdefault(number, []).append((rep.passed, f"{title}: {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        outcomes = _RESULTS[number]
        verdict = "PASS" if all(ok for ok, _ in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {outcomes[-1][1]}")
