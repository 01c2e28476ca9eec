import numpy as np
import pytest

from pairdecay import DetectorModel, RateParameters, simulate

GOLDEN_SEED = 42
GOLDEN_N = 1_000_000


@pytest.fixture(scope="session")
def p12() -> RateParameters:
    return RateParameters(gamma_f=1.0, gamma_s=2.0, n0=1.0, gamma_0=1.0)


@pytest.fixture(scope="session")
def golden_events(p12):
    """One large ideal-detector event set shared across test modules."""
    return simulate(p12, GOLDEN_N, seed=GOLDEN_SEED)


@pytest.fixture(scope="session")
def smeared_events(p12):
    """Gaussian formation-time smearing, width 0.1 tau_0, no jitter."""
    det = DetectorModel(formation_profile="gaussian", formation_width=0.1)
    return simulate(p12, GOLDEN_N, seed=7, detector=det)


def binomial_4sigma(prob: float, n: int) -> float:
    return 4.0 * np.sqrt(prob * (1.0 - prob) / n)
