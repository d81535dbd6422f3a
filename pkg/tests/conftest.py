import math

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "wedge",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("wedge")

KAPPAS = (math.pi / 2, math.pi, 1.5 * math.pi, 2 * math.pi)


@pytest.fixture(params=KAPPAS, ids=["pi/2", "pi", "3pi/2", "2pi"])
def kappa0(request):
    return request.param


# -- acceptance summary: one line per criterion ---------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config.stash[_LINES] = {}


_LINES = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    status = "PASS" if rep.passed else "FAIL"
    lines = item.config.stash[_LINES]
    if rep.when == "call" or n not in lines:
        lines[n] = f"criterion {n:>2} {status}  {title}" + (f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
