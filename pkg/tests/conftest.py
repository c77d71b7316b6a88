import pytest

_RESULTS: list[tuple[str, str, str, float, str]] = []
_SETUP: dict[str, float] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "setup":
        # module fixtures (the b = 3 orbit, the certificates) count toward their first user
        _SETUP[item.nodeid] = rep.duration
    if rep.when != "call":
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    secs = rep.duration + _SETUP.get(item.nodeid, 0.0)
    _RESULTS.append((mark.args[0], mark.args[1], "PASS" if rep.passed else "FAIL", secs, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted({r[0] for r in _RESULTS}):
        rows = [r for r in _RESULTS if r[0] == cid]
        failed = sum(r[2] == "FAIL" for r in rows)
        state = "FAIL" if failed else "PASS"
        secs = sum(r[3] for r in rows)
        detail = "; ".join(r[4] for r in rows if r[4])
        line = f"{state} criterion {cid:<3} {rows[0][1]} ({len(rows) - failed}/{len(rows)} checks, {secs:.1f}s)"
        tr.write_line(line + (f" [{detail}]" if detail else ""))
