import pytest

from crsphere.harmonics import HarmonicBasis


@pytest.fixture(scope="session")
def basis16():
    """n = 1 basis at the largest degree any test needs; restrict() for less."""
    return HarmonicBasis.build(1, 16)


@pytest.fixture(scope="session")
def basis12(basis16):
    return basis16.restrict(12)


@pytest.fixture(scope="session")
def basis8(basis16):
    return basis16.restrict(8)
