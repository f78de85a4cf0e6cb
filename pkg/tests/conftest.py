from __future__ import annotations

import numpy as np
import pytest

from softrec.channel import ChannelModel
from softrec.constellation import map_decision_regions, pam
from softrec.softening import build_transform


@pytest.fixture(scope="session")
def pam4():
    return pam(4)


@pytest.fixture(scope="session")
def bpsk():
    return pam(2)


@pytest.fixture(scope="session")
def ch4_0db(pam4):
    # Es = 5 for {-3,-1,1,3}; 0 dB under SNR = Es / (2 sigma^2) gives 2.5.
    return ChannelModel(pam4, 2.5)


@pytest.fixture(scope="session")
def ch2_0db(bpsk):
    return ChannelModel(bpsk, 0.5)


@pytest.fixture(scope="session")
def regions4(pam4):
    return map_decision_regions(pam4, 2.5)


@pytest.fixture(scope="session")
def t_base(ch4_0db):
    return build_transform(ch4_0db, "base")


@pytest.fixture(scope="session")
def t_alt(ch4_0db):
    return build_transform(ch4_0db, "alternating")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
