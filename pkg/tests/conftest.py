import numpy as np
import pytest

from freqvsr.tokenizer import TokenSet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tokens(rng, t=1, grid=(2, 2), freqs=4, channels=1, k=2, block=2, dtype=np.float32):
    """Fabricate a TokenSet with the given geometry for attention tests."""
    n = grid[0] * grid[1]
    data = rng.normal(size=(t, n, freqs, channels, k, k)).astype(dtype)
    return TokenSet(data, grid, block)
