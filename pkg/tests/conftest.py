import numpy as np
import pytest

from accband.geometry import BandConfig


@pytest.fixture
def fig1_config():
    """Headline scenario: strong jets, lam = -3000, upsilon = 30000."""
    return BandConfig(lam=-3000.0, upsilon=30000.0)


@pytest.fixture
def mild_config():
    """Desk-scale scenario used for time-stepping tests (lam = 0)."""
    return BandConfig(psi1=-0.2, psi2=0.2, omega=2.0, lam=0.0, upsilon=1.0)


@pytest.fixture
def mild_neg_lam_config():
    """Desk-scale scenario with a negative vorticity slope."""
    return BandConfig(psi1=-0.2, psi2=0.2, omega=2.0, lam=-10.0, upsilon=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
