import numpy as np
import pytest
from hypothesis import settings

from infovault.data_model import Gaussian, MarketParams

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def random_market_params(rng: np.random.Generator, **overrides) -> MarketParams:
    """Well-conditioned market with every parameter drawn from a moderate range."""

    fields = dict(
        n_informed=float(rng.integers(5, 101)),
        m_uninformed=float(rng.integers(1, 101)),
        z_noise=float(rng.uniform(0.0, 1.0)),
        risk_aversion=float(rng.uniform(0.5, 2.0)),
        prior=Gaussian(mean=float(rng.uniform(-5, 15)), variance=float(rng.uniform(0.5, 2.0))),
        signal_variance=float(rng.uniform(0.5, 2.0)),
        noise_variance=float(rng.uniform(0.5, 2.0)),
        epsilon_variance=float(rng.uniform(0.5, 2.0)),
        realized_signal=float(rng.uniform(-5, 15)),
        realized_noise=float(rng.normal()),
    )
    fields.update(overrides)
    return MarketParams(**fields)


@pytest.fixture
def params() -> MarketParams:
    return MarketParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
