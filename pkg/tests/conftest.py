import numpy as np
import pytest

from rsbesov import build_wavelet, polynomial_structure
from rsbesov.modelled import ModelledDistribution
from rsbesov.scaling import Scaling

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def sc1():
    return Scaling((1,))


@pytest.fixture(scope="session")
def sc21():
    return Scaling((2, 1))


@pytest.fixture(scope="session")
def fam6():
    return build_wavelet(6, 2)


@pytest.fixture(scope="session")
def fam4():
    return build_wavelet(4, 1)


@pytest.fixture(scope="session")
def fam9():
    return build_wavelet(9, 3)


def make_sin_lift(sc, fam, N, gamma=2.5):
    """f_k = d^k sin(2 pi x) / k! on the polynomial structure."""
    st, model = polynomial_structure(gamma, sc, fam, N)
    pts = sc.grid_points(N)[..., 0]
    vals = np.zeros((*sc.grid_shape(N), st.dim))
    vals[..., st.index("1")] = np.sin(TWO_PI * pts)
    vals[..., st.index("X^1")] = TWO_PI * np.cos(TWO_PI * pts)
    if gamma > 2:
        vals[..., st.index("X^2")] = -(TWO_PI**2) * np.sin(TWO_PI * pts) / 2.0
    return st, model, ModelledDistribution(st, gamma, N, vals)


@pytest.fixture(scope="session")
def sin_setup_n8(sc1, fam6):
    return make_sin_lift(sc1, fam6, 8)


@pytest.fixture(scope="session")
def sin_setup_n10(sc1, fam6):
    return make_sin_lift(sc1, fam6, 10)
