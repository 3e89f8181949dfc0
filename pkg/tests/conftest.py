import time

import pytest

from entirefront.entire import EntireConfig, Wave, build_profiles, construct
from entirefront.io import ArrayCache
from entirefront.model import make_model
from entirefront.spectral import compute_cstar

E1 = dict(d1=1.0, d2=1.0, gamma=1.0, beta=1.0, g_kind="g1", omega=2.0, nu=1.0)
POPULATION = dict(d1=1.0, d2=1.0, r1=2.0, r2=1.0, alpha=1.0, delta=1.0)

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, label): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        key, label = mark.args
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _ACCEPTANCE[key] = (rep.outcome, label, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        outcome, label, detail = _ACCEPTANCE[key]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {key} {status} {label}: {detail}")


@pytest.fixture(scope="session")
def e1():
    return make_model("epidemic", E1)


@pytest.fixture(scope="session")
def e1_spectral(e1):
    return compute_cstar(e1)


@pytest.fixture(scope="session")
def population():
    return make_model("population", POPULATION)


@pytest.fixture(scope="session")
def fisher():
    return make_model("custom", {"registry": "fisher"})


@pytest.fixture(scope="session")
def fisher_spectral(fisher):
    return compute_cstar(fisher)


@pytest.fixture(scope="session")
def run_cache(tmp_path_factory):
    return ArrayCache(tmp_path_factory.mktemp("runs"))


@pytest.fixture(scope="session")
def e1_config():
    return EntireConfig(waves=(Wave(1.5),), chi=(1, 1))


@pytest.fixture(scope="session")
def e1_run(e1, e1_spectral, e1_config, run_cache):
    """The default E1 construction: (final trajectory, report, profiles, seconds)."""
    t = time.perf_counter()
    profiles = build_profiles(e1, e1_spectral, e1_config)
    traj, rep = construct(e1_config, e1, profiles, e1_spectral, cache=run_cache,
                          raise_on_failure=False)
    return traj, rep, profiles, time.perf_counter() - t
