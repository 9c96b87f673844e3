import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from probeq import ScenarioConfig, SignalTiming, bundled_config_path, load_config

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def s1_spec():
    return load_config(bundled_config_path("s1"))


@pytest.fixture(scope="session")
def s2_spec():
    return load_config(bundled_config_path("s2"))


@pytest.fixture()
def quick_scenario(s1_spec):
    """A short, light S1 run configuration for smoke-scale simulations."""

    def make(p=0.5, horizon_s=3600.0, seed=11, scenario=None):
        base = scenario if scenario is not None else s1_spec.scenario
        return ScenarioConfig(
            topology=base.topology,
            rho=base.rho,
            lam=base.lam,
            p=p,
            q_sat=base.q_sat,
            timing=SignalTiming(base.timing.red_s, base.timing.green_s),
            horizon_s=horizon_s,
            seed=seed,
        )

    return make
