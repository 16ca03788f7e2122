import numpy as np
import pytest
from hypothesis import settings

from edas import lazy_metropolis, ring, spectral
from edas.problems import quadratic_problem

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ring8():
    return spectral(lazy_metropolis(ring(8)))


@pytest.fixture(scope="session")
def ring8_problem(ring8):
    return quadratic_problem(ring8, p=1, noise_sigma=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion."""

    class Recorder:
        def __init__(self):
            self.number, self.detail = None, ""

        def __call__(self, number, detail=""):
            self.number, self.detail = number, detail

    rec = Recorder()
    yield rec
    report = getattr(request.node, "rep_call", None)
    if rec.number is not None and report is not None:
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_LINES[rec.number] = f"criterion {rec.number:2d}: {status}  {rec.detail}"


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
