import math

import numpy as np
import pytest

from u2vchan.channel import AntennaArray, CarrierConfig, Scene
from u2vchan.config import ScenarioConfig, build_scene, validate
from u2vchan.mobility import MobilityProfile
from u2vchan.scenario import ClusterParams, RiceanProcess, generate_clusters

# Filled by test_acceptance.py, printed at the end of the run.
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k[0]), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def fig3_config():
    return validate(ScenarioConfig(preset="paper-fig3", seed=0))


@pytest.fixture(scope="session")
def fig3_scene(fig3_config):
    return build_scene(fig3_config)


def small_scene(n=2, m=2, seed=3, mean_k=2.0, std_k=0.0, tx=None, rx=None, f0=2.4e9,
                posture=True, elements=2, **params):
    """A cheap scene for unit tests: few clusters, constant K by default."""
    carrier = CarrierConfig(f0)
    lam = carrier.wavelength
    if tx is None:
        tx = MobilityProfile.constant_velocity([0.0, 0.0, 150.0], 30.0, math.pi, duration=1.0)
    if rx is None:
        rx = MobilityProfile.constant_velocity([150.0, 0.0, 0.0], 15.0, math.pi / 4, duration=1.0)
    clusters = generate_clusters(n, m, ClusterParams(**params), seed)
    return Scene(
        carrier=carrier,
        tx=tx,
        rx=rx,
        tx_array=AntennaArray.ula(elements, lam / 2),
        rx_array=AntennaArray.ula(elements, lam / 2),
        clusters=clusters,
        k_process=RiceanProcess(mean_k, std_k, 0.1, seed),
        posture=posture,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
