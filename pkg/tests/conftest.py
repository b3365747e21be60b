import contextlib
import os

import numpy as np
import pytest
from hypothesis import settings

from plaplace.core import Exponential, ExtremalKind, ProblemSpec, exact_extremal
from plaplace.radial_solver import shoot_lambda

settings.register_profile("repro", max_examples=200, derandomize=True, deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))


@pytest.fixture(scope="session")
def exp_critical():
    return exact_extremal(ExtremalKind.EXPONENTIAL_CRITICAL, 10, 2)


@pytest.fixture(scope="session")
def exp_critical_p3():
    return exact_extremal(ExtremalKind.EXPONENTIAL_CRITICAL, 9, 3)


@pytest.fixture(scope="session")
def power_super():
    return exact_extremal(ExtremalKind.POWER_SUPERCRITICAL, 11, 2)


@pytest.fixture(scope="session")
def minimal_n3():
    """Lower-branch solution of (N=3, p=2, e^u) at amplitude 0.5, below the fold."""
    res = shoot_lambda(3, 2.0, Exponential(), 0.5)
    return res.profile, ProblemSpec(3, 2.0, res.lam, Exponential())


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def run(label):
        state = {"ok": False, "detail": ""}
        try:
            yield state
        except BaseException as exc:
            state["ok"], state["detail"] = False, f"{type(exc).__name__}: {exc}"
            raise
        finally:
            line = f"{label}: {'PASS' if state['ok'] else 'FAIL'}  {state['detail']}"
            ACCEPTANCE_LINES.append(line)
            print(line)
        assert state["ok"], state["detail"]

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def pytest_configure(config):
    np.seterr(over="ignore", under="ignore")
