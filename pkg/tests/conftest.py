"""Shared fixtures.  The expensive runs are session scoped so the acceptance
module and the per-module tests reuse one computation."""

import math
import time

import pytest

from superdense.density import superdensity_scan
from superdense.diophantine import slope_value
from superdense.experiments import ScenarioConfig, load_surface, parse_direction, verify_theorem
from superdense.flow import direction_from_slope
from superdense.moduli import geodesic_track

PHI = (1 + math.sqrt(5)) / 2
GOLDEN = parse_direction("phi").vector
VERTICAL = (0.0, 1.0)

# wall-clock seconds of the timed session fixtures, and acceptance verdict lines
TIMINGS: dict[str, float] = {}
ACCEPTANCE: dict[int, str] = {}


def timed(key, fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    TIMINGS[key] = time.perf_counter() - t0
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def torus():
    return load_surface("torus")


@pytest.fixture(scope="session")
def L3():
    return load_surface("st-L3")


@pytest.fixture(scope="session")
def golden_report():
    """Full default pipeline on the unit torus with golden slope."""
    return timed("golden_report", verify_theorem, ScenarioConfig("torus", "phi"))


@pytest.fixture(scope="session")
def vertical_report():
    return verify_theorem(ScenarioConfig("torus", "0/1"))


@pytest.fixture(scope="session")
def golden_track(golden_report):
    return golden_report.track


@pytest.fixture(scope="session")
def vertical_track(torus):
    return geodesic_track(torus, VERTICAL, t_max=3.0, dt=0.25)


@pytest.fixture(scope="session")
def golden_profile(golden_report):
    return golden_report.profile


@pytest.fixture(scope="session")
def vertical_profile(torus):
    return superdensity_scan(torus, VERTICAL, [4, 8, 16, 32])


@pytest.fixture(scope="session")
def l3_sqrt2_profile(L3):
    return timed("l3_sqrt2", superdensity_scan, L3, direction_from_slope(math.sqrt(2)), [4, 8, 16])


@pytest.fixture(scope="session")
def l3_injected_profile(L3):
    s = slope_value("cf:0,1,1000" + ",1" * 20)
    return timed("l3_injected", superdensity_scan, L3, direction_from_slope(s), [4, 8, 16])
