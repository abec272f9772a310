import numpy as np
import pytest

from ccgsim import CCGParams


@pytest.fixture
def unit_params():
    """Internal-unit parameter point with chi = kappa = 1."""
    return CCGParams(gamma=1.0, sigma0=1.0, m0=1.0, G=1.0, hbar=1.0)


@pytest.fixture
def chi_params():
    """Internal-unit parameters with a stronger gravity knob."""
    return CCGParams(gamma=1.0, sigma0=1.0, m0=1.0, G=40.0, hbar=1.0)


def rand_config(rng, n, spread=6.0, mass_lo=0.5, mass_hi=4.0, min_sep=0.3):
    """Random particle configuration with a minimum pair separation."""
    from ccgsim import ParticleConfig
    masses = rng.uniform(mass_lo, mass_hi, size=n)
    while True:
        pos = rng.uniform(-spread, spread, size=(n, 3))
        ok = True
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(pos[i] - pos[j]) < min_sep:
                    ok = False
        if ok:
            return ParticleConfig(masses, pos)
