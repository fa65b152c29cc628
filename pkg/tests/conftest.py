import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def small_pmfg():
    """A deterministic 10-node planarity-filtered network."""
    from commnet import corrnet, marketdata

    prices = marketdata.generate_synthetic(10, 90, coupling=0.5, seed=11)
    panel = marketdata.compute_log_returns(prices)
    window = marketdata.slice_windows(panel, 60)[0]
    return corrnet.build_pmfg(corrnet.pearson(window), nodes=window.tickers)
