import numpy as np
import pytest

from stackcast.market_data import OhlcvSeries

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "slow: long-running simulation")


@pytest.fixture
def detail(request):
    """Tests append short result notes shown next to their criterion in the summary."""
    notes = []
    request.node._criterion_notes = notes
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "ran": False, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["ran"] = True
        if rep.failed:
            entry["passed"] = False
        if rep.skipped:
            entry["notes"].append("skipped")
        entry["notes"].extend(getattr(item, "_criterion_notes", []))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["passed"] and e["ran"] else "FAIL"
        note = "; ".join(dict.fromkeys(e["notes"]))
        tr.write_line(f"[{status}] criterion {number}: {e['title']}" + (f" ({note})" if note else ""))


def random_ohlcv(n, seed, start="2015-01-01", s0=100.0, sigma=0.03):
    """Random-walk OHLCV series satisfying the price invariants."""
    rng = np.random.default_rng(seed)
    close = s0 * np.exp(np.cumsum(sigma * rng.standard_normal(n)))
    open_ = np.concatenate([[s0], close[:-1]]) * np.exp(0.005 * rng.standard_normal(n))
    top, bottom = np.maximum(open_, close), np.minimum(open_, close)
    high = top * (1 + np.abs(rng.normal(0, 0.01, n)))
    low = bottom * (1 - np.abs(rng.normal(0, 0.01, n)))
    vf = rng.lognormal(8, 0.5, n)
    vt = vf * close
    dates = np.datetime64(start, "D") + np.arange(n)
    return OhlcvSeries(dates, open_, high, low, close, vf, vt)


@pytest.fixture
def ohlcv():
    return random_ohlcv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
