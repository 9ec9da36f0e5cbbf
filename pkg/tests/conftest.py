import numpy as np
import pytest

from obslab.evolution import EvolutionSpec
from obslab.grid import CoefficientField, Grid1D
from obslab.scenario import Component, DataCoupling, Scenario


def const(c):
    return CoefficientField.constant(float(c))


def wave(c=1.0, weight=1.0):
    return Component(EvolutionSpec("wave", coeff=const(c)), weight)


def evolution(k, scale=1.0, weight=1.0, c=1.0):
    return Component(EvolutionSpec("evolution", k, scale=scale, coeff=const(c)), weight)


def make_scenario(components, mode="linked_identity", N=99, a=0.6, b=1.0, T=3.0, cutoff=24, **kw):
    return Scenario(
        grid=Grid1D(1.0, N),
        a=a,
        b=b,
        T=T,
        components=tuple(components),
        coupling=DataCoupling(mode),
        cutoff=cutoff,
        **kw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
