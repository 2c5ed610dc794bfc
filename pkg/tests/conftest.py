import numpy as np
import pytest

from risec.channels import ChannelSet
from risec.metrics import NoisePowers


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, N=2, M=2, scale=1.0):
    return ChannelSet(H_AI=scale * cn(rng, M, N), h_AB=scale * cn(rng, N), h_AE=scale * cn(rng, N),
                      h_IB=scale * cn(rng, M), h_IE=scale * cn(rng, M))


def unit_vector(rng, n):
    w = cn(rng, n)
    return w / np.linalg.norm(w)


def unit_modulus(rng, m):
    return np.exp(2j * np.pi * rng.uniform(size=m))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_noise():
    return NoisePowers(1.0, 1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name in mod.REPORT:
        terminalreporter.write_line(mod.report_line(name))
