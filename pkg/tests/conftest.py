import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ocdma_pc import kernels
from ocdma_pc.netmodel import NetworkInstance, SystemParams, generate_feasible_instance

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.available_backends()[request.param])
    return request.param


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def inst8(params):
    return generate_feasible_instance(params, "II", 0, 8)


@pytest.fixture(scope="session")
def inst4(params):
    return generate_feasible_instance(params, "II", 7, 4)


def toy_instance(G, noise, target, p_min=1e-10, p_max=0.1, seed=0):
    G = np.asarray(G, dtype=float)
    K = len(G)
    return NetworkInstance(G=G, noise=np.broadcast_to(noise, K), cir_target=np.broadcast_to(target, K),
                           snir_target=np.ones(K), min_rate=np.full(K, 1e6), p_min=p_min,
                           p_max=p_max, chip_period=1e-6, seed=seed)


def random_point(inst, rng):
    """Powers spread log-uniformly over the upper part of the box."""
    return np.exp(rng.uniform(np.log(1e-5), np.log(inst.p_max), inst.K))


#: (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n, ok, detail in sorted(ACCEPTANCE):
            terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
