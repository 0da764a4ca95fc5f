import numpy as np
import pytest

from batchlsm import Records


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def recs(*items):
    """``recs((5, 1, 10), (5, 0, 0))`` -> Records of (key, regular?, value)."""
    return Records.from_tuples(items)


def random_sorted_run(rng, n, alphabet, tag_base=0):
    keys = np.sort(rng.integers(0, alphabet, n))
    status = rng.integers(0, 2, n)
    return Records.from_tuples(zip(keys.tolist(), status.tolist(), range(tag_base, tag_base + n)))


def random_records(rng, n, alphabet=1 << 31):
    keys = rng.integers(0, min(alphabet, (1 << 31) - 1), n)
    status = rng.integers(0, 2, n)
    return Records.from_tuples(zip(keys.tolist(), status.tolist(), range(n)))


# -- acceptance reporting ------------------------------------------------

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    n, text = mark.args
    if report.when == "setup" and report.passed:
        return
    detail = getattr(item, "acceptance_detail", "")
    _criteria[n] = ("PASS" if report.passed else "FAIL", text, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        verdict, text, detail = _criteria[n]
        line = f"{verdict} criterion {n}: {text}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
