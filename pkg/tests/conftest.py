import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    status = "PASS" if report.outcome == "passed" else "FAIL"
    prev = _CRITERIA.get(n)
    if prev and prev[0] == "FAIL":
        status = "FAIL"
    detail = props.get("detail", prev[1] if prev else "")
    _CRITERIA[n] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Tag a test with its criterion number; call ``report(text)`` to attach measurements."""

    def tag(n):
        request.node.user_properties.append(("criterion", n))

        def report(text):
            request.node.user_properties.append(("detail", text))
            print(f"criterion {n}: {text}")

        return report

    return tag
