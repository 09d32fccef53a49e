import math

import pytest
from scipy.special import ndtri

from nosignal import SGConfig, make_spin_state


def device_for_error_fraction(target: float, transit: float = 0.002) -> SGConfig:
    """SGConfig whose saturated error fraction is `target` (sigma0 = m = 1).

    Inverts the Gaussian tail: the kick must be -ndtri(target)/2.
    """
    kick = -float(ndtri(target)) / 2.0
    return SGConfig(
        mass=1.0,
        sigma0=1.0,
        moment=1.0,
        gradient=kick / transit,
        bias=0.0,
        transit=transit,
    )


@pytest.fixture
def device() -> SGConfig:
    return SGConfig(
        mass=1.0, sigma0=1.0, moment=1.0, gradient=210.4, bias=0.0, transit=0.002
    )


@pytest.fixture
def x_state():
    return make_spin_state(1.0, 1.0)


@pytest.fixture
def up_state():
    return make_spin_state(1.0, 0.0)


def wrap_to_pi(x: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y <= 0:
        y += 2.0 * math.pi
    return y - math.pi
