import warnings

import pytest

from fsocap.channel import GGOnly, GGPointing
from fsocap.linkmodel import LinkGeometry, TurbulenceState, derive_pointing_state

ROWS = {"weak": 0.8, "moderate": 2.0, "strong": 6.0}


def scenario(rytov):
    geom = LinkGeometry()
    turb = TurbulenceState.from_rytov(rytov, geom)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        point = derive_pointing_state(geom, turb.cn2)
    return geom, turb, point


def models_for(rytov):
    _, t, p = scenario(rytov)
    return GGPointing(t.a, t.b, p.xi, p.A0), GGOnly(t.a, t.b)


@pytest.fixture(params=list(ROWS), ids=list(ROWS))
def row(request):
    return request.param, ROWS[request.param]


@pytest.fixture
def strong_models():
    return models_for(6.0)


ACCEPTANCE_LINES: list[str] = []


def report(criterion, ok, detail):
    """Record one acceptance verdict; printed again in the terminal summary."""
    line = f"acceptance {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
