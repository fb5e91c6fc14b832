import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from clsnet import LatentSpace

settings.register_profile(
    "clsnet", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("clsnet")

R2 = LatentSpace.euclidean(2)
H2 = LatentSpace.halfplane()


def random_points(space, n, rng, scale=1.0):
    """Points spread over a few units around the space origin."""
    if space.hyperbolic:
        return np.column_stack([rng.normal(scale=scale, size=n), np.exp(rng.normal(scale=scale, size=n))])
    return rng.normal(scale=scale, size=(n, space.dim))


@pytest.fixture(params=["euclidean", "halfplane"])
def space(request):
    return R2 if request.param == "euclidean" else H2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria append (name, passed, detail) here; echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for name, ok, detail in ACCEPTANCE_LINES:
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
