import numpy as np
import pytest

from parareal_msm import fixtures
from parareal_msm.core import ParticleSystem
from parareal_msm.electrostatics import direct_coulomb


@pytest.fixture(scope="session")
def msm500():
    return fixtures.msm_accuracy_system()


@pytest.fixture(scope="session")
def msm500_direct(msm500):
    return direct_coulomb(msm500)


@pytest.fixture(scope="session")
def small_system():
    """30 charges, used for finite-difference checks."""
    from parareal_msm.core import generate_random_system
    return generate_random_system(30, (10.0, 10.0, 10.0), "random_neutral",
                                  min_separation=1.2, seed=11)


@pytest.fixture(scope="session")
def parareal10():
    return fixtures.parareal_system()


def make_system(positions, charges=None, velocities=None, masses=None, box=None):
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    return ParticleSystem(
        pos,
        np.zeros((n, 3)) if velocities is None else np.asarray(velocities, float),
        np.ones(n) if charges is None else np.asarray(charges, float),
        np.ones(n) if masses is None else np.asarray(masses, float),
        np.full(3, 10.0) if box is None else np.asarray(box, float))


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
