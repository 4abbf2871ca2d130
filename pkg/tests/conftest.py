import os
import time

import pytest

from krflow.scenarios import REGISTRY, run_scenario


def pytest_addoption(parser):
    parser.addoption("--regen-golden", action="store_true", default=False,
                     help="rewrite tests/golden/hashes.json from fresh scenario runs")


@pytest.fixture(scope="session")
def regen_golden(request):
    return request.config.getoption("--regen-golden") or os.environ.get("KRFLOW_REGEN_GOLDEN") == "1"


@pytest.fixture(scope="session")
def warm_kernels():
    # first call compiles (or loads) the numba kernels
    run_scenario("homogeneous_ode", overrides={"t_end": 0.1})


@pytest.fixture(scope="session")
def scenario_runs(tmp_path_factory, warm_kernels):
    """Every shipped scenario executed twice into separate directories.

    Maps name -> (first outcome, first dir, second dir, seconds for the first run).
    """
    runs = {}
    for name in REGISTRY:
        first = tmp_path_factory.mktemp(f"{name}_a")
        second = tmp_path_factory.mktemp(f"{name}_b")
        start = time.perf_counter()
        outcome = run_scenario(name, first)
        elapsed = time.perf_counter() - start
        run_scenario(name, second)
        runs[name] = (outcome, first, second, elapsed)
    return runs
