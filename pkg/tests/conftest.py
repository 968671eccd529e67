import pytest

from crossaug.tensor import Rng


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def identity_rows():
    """32 x 16 uniform rows; the identity-mapping fixture."""
    return Rng(7).uniform((32, 16))
