import re

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    title = m.group(2).split("[")[0].replace("_", " ")
    ok = report.passed if report.when == "call" else not report.failed
    titles, prev_ok = _results.get(key, ([], True))
    if title not in titles:
        titles.append(title)
    _results[key] = (titles, prev_ok and ok)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results):
        titles, ok = _results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {' + '.join(titles)}")
