import pytest

from pdoa import (
    ChannelParams,
    ProtocolConfig,
    Scenario,
    default_clock,
    default_synthesizer,
)

DF1 = 0.5e6
DT = 80e-6
ETA0 = 8e-5
D01 = 140.0


@pytest.fixture
def clock():
    return default_clock()


@pytest.fixture
def synth():
    return default_synthesizer()


@pytest.fixture
def channel():
    return ChannelParams(d01=D01)


@pytest.fixture
def cfg10():
    return ProtocolConfig(n_freq=10, p_time=10, dt=DT)


@pytest.fixture
def scenario(clock, synth, channel):
    return Scenario(clock=clock, synth=synth, channel=channel, dt=DT)
