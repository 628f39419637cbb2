import numpy as np
import pytest

SOUND_SPEED = 346.2


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def quad_grid():
    """Gauss-Legendre x uniform-azimuth quadrature, exact for order <= ~39.

    Returns (theta, phi, weights) flattened; weights integrate functions on
    the unit sphere: sum(w * f(theta, phi)) ~ integral over S^2.
    """
    n_theta, n_phi = 40, 80
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    weights = np.broadcast_to(w[:, None] * (2.0 * np.pi / n_phi), th.shape)
    return th.ravel(), ph.ravel(), weights.ravel()


def wavenumber(freq_hz, c=SOUND_SPEED):
    return 2.0 * np.pi * freq_hz / c
