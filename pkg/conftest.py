# conftest.py
import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from channel import ChannelRealization  # noqa: E402
from quantizer import CombinerState, dft_codebook, selection_from_beams  # noqa: E402
from scenario import SystemConfig  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run Monte-Carlo trend checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo checks, only with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class Instance:
    """Random (chan, comb, theta, decoders, sigma2) with unit-scale entries."""

    def __init__(self, rng, n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2, sigma2=0.1):
        self.chan = ChannelRealization(g=crandn(rng, n_ap, n_ris), h=crandn(rng, n_ris, n_users))
        beams = rng.choice(n_beams, size=n_rf, replace=False)
        self.comb = CombinerState(dft_codebook(n_ap, n_beams), selection_from_beams(beams, n_beams), bits)
        self.theta = np.exp(2j * np.pi * rng.random(n_ris))
        self.decoders = crandn(rng, n_rf, n_users)
        self.sigma2 = sigma2


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def make_instance(rng):
    def factory(**kwargs):
        return Instance(rng, **kwargs)
    return factory


@pytest.fixture
def small_cfg():
    return SystemConfig(n_ap=8, n_ris=4, n_beams=4, n_rf=2, n_users=2, n_paths_g=2, n_paths_h=2, seed=7)


@pytest.fixture
def tiny_cfg():
    return SystemConfig(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, b_max=3, n_paths_g=2, n_paths_h=2, seed=11)
