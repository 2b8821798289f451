import functools
import os
import sys
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []
# wall-clock seconds of the cached protocol computations, keyed like the caches
RUN_SECONDS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


PROTOCOLS = {
    "apple": ((-1.35, -0.35), 15 * np.pi / 16),
    "peanut": ((1.1, -0.3), 21 * np.pi / 16),
}


@functools.lru_cache(maxsize=None)
def protocol_data(shape: str):
    """Noise-free forward traces (n_tilde=50, T=10, N=128) of the reference protocol for ``shape``."""
    from elastic_cq.forward import ElasticMedium, IncidentWave, forward_solve
    from elastic_cq.geometry import ObservationCircle, apple, peanut

    start = time.perf_counter()
    truth = apple() if shape == "apple" else peanut()
    wave = IncidentWave(theta_inc=PROTOCOLS[shape][1])
    traces = forward_solve(truth, ObservationCircle(), wave, ElasticMedium(), 10.0, 128, 50)
    RUN_SECONDS[shape] = time.perf_counter() - start
    return truth, wave, traces


@functools.lru_cache(maxsize=None)
def reconstruction_run(shape: str, delta: float, seed: int = 0):
    """Reconstruction (n_tilde=32) from the protocol data with multiplicative noise ``delta``."""
    from elastic_cq.forward import ElasticMedium, add_noise
    from elastic_cq.inverse import InverseConfig, reconstruct

    truth, wave, traces = protocol_data(shape)
    start = time.perf_counter()
    data = add_noise(traces, delta, seed)
    config = InverseConfig(n_tilde=32, delta=delta, r0=0.4, center=PROTOCOLS[shape][0])
    state = reconstruct(data, wave, ElasticMedium(), config)
    RUN_SECONDS[(shape, delta, seed)] = RUN_SECONDS[shape] + time.perf_counter() - start
    return truth, state


@pytest.fixture(scope="session")
def protocol_run():
    return reconstruction_run
