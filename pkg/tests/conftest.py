import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def materials():
    from casimir_rig.materials import bundled_materials

    return bundled_materials()


@pytest.fixture(scope="session")
def gold(materials):
    return materials["gold"]


@pytest.fixture(scope="session")
def ito(materials):
    return materials["ito"]


@pytest.fixture(scope="session")
def gold_curve(gold):
    from casimir_rig.rig import casimir_truth_curve

    return casimir_truth_curve(gold, gold)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260808)
