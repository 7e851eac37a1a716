import numpy as np
import pytest
import scipy.sparse as sp

from deflatron.problems import make_rng


def random_spd(n, seed, cond=None):
    """Dense SPD matrix with a seeded random orthogonal frame."""
    rng = make_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if cond is None:
        ev = rng.uniform(0.1, 10.0, n)
    else:
        ev = np.geomspace(1.0, cond, n)
    a = (q * ev) @ q.T
    return 0.5 * (a + a.T)


def laplace_1d(n):
    return sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr")


@pytest.fixture
def rng():
    return make_rng(1234)


# one PASS/FAIL line per acceptance criterion -------------------------------

_criteria: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria[name] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _criteria.items():
        terminalreporter.write_line(f"{verdict}  {name}")
