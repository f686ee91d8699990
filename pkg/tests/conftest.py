import numpy as np
import pytest

from uccfn.config import SystemParams, validate


@pytest.fixture(scope="session")
def fig3_params():
    """Deployment used throughout: 4 GHz-class downlink, overlapping clusters."""
    return validate(SystemParams.from_cluster_averages(
        p_t=0.1, freq=3e9, alpha=2.5, r0=1.0, r1=100.0,
        n_av_R=4.0, n_av_U=2.5, m=4, n0=0.0))


@pytest.fixture(scope="session")
def light_params():
    """Small cluster sizes keep the analytic pipeline fast in unit tests."""
    return validate(SystemParams.from_cluster_averages(
        p_t=0.1, freq=4e9, alpha=2.5, r0=1.0, r1=100.0,
        n_av_R=2.0, n_av_U=0.5, m=1, n0=0.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
