import time

import numpy as np
import pytest

from zeroarea import models
from zeroarea.core import HermitianOp, QuantumState, SystemModel, TimeGrid
from zeroarea.oct import OctConfig, optimize

MU_TF = (0.0, 0.25, 1.8, 4.5)
LAMBDA = 100.0

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rotor_params():
    return models.RotorParams()


@pytest.fixture(scope="session")
def rotor(rotor_params):
    return models.build_rotor(rotor_params)


@pytest.fixture(scope="session")
def co_grid(rotor_params):
    return TimeGrid(rotor_params.rotational_period, 2**14)


@pytest.fixture(scope="session")
def coarse_co_grid(rotor_params):
    return TimeGrid(rotor_params.rotational_period, 2**11)


@pytest.fixture
def two_level():
    """H0 = diag(0, 1), H1 = sigma_x."""
    h0 = HermitianOp(np.diag([0.0, 1.0]))
    h1 = HermitianOp(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return SystemModel(h0, h1, ("0", "1"), name="qubit")


@pytest.fixture
def random_model():
    rng = np.random.default_rng(7)
    n = 5
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    return SystemModel(HermitianOp((a + a.conj().T) / 2), HermitianOp((b + b.T) / 2), name="random")


def random_state(n, seed=0) -> QuantumState:
    rng = np.random.default_rng(seed)
    return QuantumState.normalized(rng.normal(size=n) + 1j * rng.normal(size=n))


@pytest.fixture(scope="session")
def co_runs():
    """The CO experiment at lambda = 100 a.u. for every area weight, with wall times."""
    params = models.RotorParams()
    model = models.build_rotor(params)
    grid = TimeGrid(params.rotational_period, 2**14)
    guess = models.guess_pulse(params, grid)
    psi0, target = models.ground_state(params), models.target_state(params)
    runs, seconds = {}, {}
    for mu_tf in MU_TF:
        cfg = OctConfig(guess=guess, lam=LAMBDA, mu=mu_tf / grid.tf,
                        max_iterations=200, target_fidelity=0.99)
        start = time.perf_counter()
        runs[mu_tf] = optimize(model, psi0, target, cfg)
        seconds[mu_tf] = time.perf_counter() - start
    return runs, seconds
