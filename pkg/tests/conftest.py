import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from abstab.analysis import expand_example
from abstab.hjb import solve

settings.register_profile("default", deadline=None, suppress_health_check=(HealthCheck.too_slow,))
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=(HealthCheck.too_slow,))
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

ROTATION = [[0.0, -1.0], [1.0, 0.0]]


def example(k, eps=1.0, m_min=1.0, m_max=4.0):
    return expand_example(k, m_min, m_max, eps)


@pytest.fixture(scope="session")
def example_fields():
    """Solved fields of the damped-oscillator family at k = 0.3 and 0.5 (dkappa 0.01, 20 half-turns)."""
    out = {}
    for k in (0.3, 0.5):
        plant, spec = example(k)
        out[k] = solve(plant, spec, 0.01, 20)
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_oscillatory(rng, max_f=4.0):
    """Random plant that rotates counterclockwise, decays at both gain ends and has modest |f|."""
    from abstab.errors import NotOscillatory
    from abstab.plant import PlantSystem, check_oscillatory

    while True:
        w = rng.uniform(0.8, 2.0)
        A = np.array([[rng.uniform(-0.6, 0.1), -w], [w * rng.uniform(0.6, 1.4), rng.uniform(-0.6, 0.1)]])
        b = rng.uniform(-0.4, 0.4, 2)
        c = rng.uniform(-0.6, 0.6, 2)
        plant = PlantSystem(A, b, c)
        try:
            rep = check_oscillatory(plant, n_theta=257, n_kappa=65)
        except NotOscillatory:
            continue
        if rep.swapped:
            continue
        ok = all(np.all(np.linalg.eigvals(A + k * plant.B).real < 0) for k in (0.0, 1.0))
        theta = np.linspace(0, np.pi, 257)
        from abstab.plant import PolarField

        f = PolarField(plant).f(np.linspace(0, 1, 11)[:, None], theta[None, :])
        if ok and np.abs(f).max() < max_f:
            return plant
