import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from holderpsh.fixtures import FIXTURES
from holderpsh.pipeline import build_pipeline
from holderpsh.specfile import RunConfig

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def domains():
    return {name: f() for name, f in FIXTURES.items()}


_BUILDS = {}


def get_build(name):
    """Default-config build of a named fixture, shared across the session."""
    if name not in _BUILDS:
        cfg = RunConfig(spec=f"fixture:{name}")
        _BUILDS[name] = build_pipeline(FIXTURES[name](), cfg)
    return _BUILDS[name]


@pytest.fixture(scope="session")
def half_build():
    return get_build("half_space")


@pytest.fixture(scope="session")
def cusp_build():
    return get_build("holder_cusp")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for n, m in list(sys.modules.items()) if n.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
