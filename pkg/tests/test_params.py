import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccgsim import (CCGParams, UnitScales, derive_sigma_pair,
                    derive_sigma_single, from_internal, to_internal)

positive = st.floats(min_value=1e-6, max_value=1e6,
                     allow_nan=False, allow_infinity=False)


def test_sigma_single_reference_mass(unit_params):
    assert derive_sigma_single(1.0, unit_params) == 1.0


def test_sigma_single_sqrt_scaling(unit_params):
    assert derive_sigma_single(4.0, unit_params) == pytest.approx(0.5, rel=1e-15)


def test_sigma_single_composite_total_mass(unit_params):
    # N reference masses probed together resolve the center of mass
    # sqrt(N) times better than one of them.
    n = 7
    assert derive_sigma_single(n * 1.0, unit_params) == pytest.approx(
        1.0 / math.sqrt(n), rel=1e-15)


def test_sigma_pair_equal_reference_masses(unit_params):
    assert derive_sigma_pair(1.0, 1.0, unit_params) == pytest.approx(
        math.sqrt(2.0), rel=1e-15)


def test_sigma_pair_double_masses(unit_params):
    assert derive_sigma_pair(2.0, 2.0, unit_params) == pytest.approx(1.0, rel=1e-15)


def test_sigma_pair_heavy_partner_limit(unit_params):
    # mu -> m_n when the partner dominates, so the pair resolution
    # approaches the single-particle one to half the mass ratio.
    got = derive_sigma_pair(1.0, 1e9, unit_params)
    single = derive_sigma_single(1.0, unit_params)
    assert got == pytest.approx(single * (1.0 + 5e-10), rel=2e-10)


def test_nonpositive_mass_rejected(unit_params):
    with pytest.raises(ValueError):
        derive_sigma_single(0.0, unit_params)
    with pytest.raises(ValueError):
        derive_sigma_pair(-1.0, 1.0, unit_params)


def test_params_validation():
    with pytest.raises(ValueError):
        CCGParams(gamma=0.0, sigma0=1.0, m0=1.0)
    with pytest.raises(ValueError):
        CCGParams(gamma=1.0, sigma0=-1.0, m0=1.0)


@given(a=positive, b=positive)
@settings(max_examples=60, deadline=None)
def test_sigma_pair_symmetric(a, b):
    p = CCGParams(gamma=1.0, sigma0=1.0, m0=1.0, G=1.0, hbar=1.0)
    assert derive_sigma_pair(a, b, p) == derive_sigma_pair(b, a, p)


@given(m=positive)
@settings(max_examples=60, deadline=None)
def test_sigma_pair_equal_masses_vs_single(m):
    p = CCGParams(gamma=1.0, sigma0=1.0, m0=1.0, G=1.0, hbar=1.0)
    assert derive_sigma_pair(m, m, p) == pytest.approx(
        math.sqrt(2.0) * derive_sigma_single(m, p), rel=1e-12)


@given(gamma=positive, sigma0=positive, m0=positive, value=positive)
@settings(max_examples=60, deadline=None)
def test_round_trip_identity(gamma, sigma0, m0, value):
    p = CCGParams(gamma=gamma, sigma0=sigma0, m0=m0)
    for role in ("length", "mass", "time", "energy", "momentum", "force",
                 "gravitational_constant", "momentum_diffusion"):
        back = from_internal(p, to_internal(p, value, role), role)
        assert back == pytest.approx(value, rel=1e-12)


def test_internal_units_are_unity():
    p = CCGParams(gamma=123.0, sigma0=4.5e-8, m0=2.2e-25)
    assert to_internal(p, p.sigma0, "length") == pytest.approx(1.0, rel=1e-14)
    assert to_internal(p, p.gamma, "rate") == pytest.approx(1.0, rel=1e-14)
    assert to_internal(p, p.m0, "mass") == pytest.approx(1.0, rel=1e-14)


def test_chi_is_dimensionless_kick_scale():
    # chi must equal the Newtonian momentum kick between two reference
    # masses at unit internal separation, in units of hbar / sigma0.
    p = CCGParams(gamma=7.0, sigma0=3.0e-7, m0=5.0e-26)
    kick = p.G * p.m0**2 / (p.gamma * p.sigma0**2)
    assert kick * p.sigma0 / p.hbar == pytest.approx(p.chi, rel=1e-14)


def test_internal_params_preserve_chi_and_kappa():
    p = CCGParams(gamma=7.0, sigma0=3.0e-7, m0=5.0e-26)
    q = p.internal()
    assert (q.gamma, q.sigma0, q.m0) == (1.0, 1.0, 1.0)
    assert q.chi == pytest.approx(p.chi, rel=1e-12)
    assert q.kappa == pytest.approx(p.kappa, rel=1e-12)


def test_internal_conversion_preserves_physics():
    # A force computed from internal-unit inputs with internal-unit
    # constants must convert back to the value computed directly.
    p = CCGParams(gamma=7.0, sigma0=3.0e-7, m0=5.0e-26)
    q = p.internal()
    m = 3.0 * p.m0
    r = 11.0 * p.sigma0
    f_direct = p.G * m * m / r**2
    m_i = to_internal(p, m, "mass")
    r_i = to_internal(p, r, "length")
    f_internal = q.G * m_i * m_i / r_i**2
    assert from_internal(p, f_internal, "force") == pytest.approx(f_direct, rel=1e-12)


def test_unknown_role_rejected(unit_params):
    with pytest.raises(ValueError):
        to_internal(unit_params, 1.0, "charge")


def test_unit_scales_named_fields():
    p = CCGParams(gamma=2.0, sigma0=3.0, m0=5.0)
    u = UnitScales.from_params(p)
    assert u.length == 3.0
    assert u.mass == 5.0
    assert u.time == 0.5
    assert u.energy_quantum == pytest.approx(p.hbar * p.gamma)
    assert u.momentum_quantum == pytest.approx(p.hbar / p.sigma0)


def test_reference_mass_degeneracy():
    # Predictions depend on m0 and sigma0 only through m0 sigma0^2, so
    # rescaling m0 -> c m0, sigma0 -> sigma0/sqrt(c) must leave every
    # physical resolution unchanged.
    base = CCGParams(gamma=3.0, sigma0=2.0e-7, m0=4.0e-26)
    c = 17.3
    alt = CCGParams(gamma=3.0, sigma0=base.sigma0 / math.sqrt(c), m0=c * base.m0)
    for m in (1e-26, 5e-25, 2e-24):
        assert derive_sigma_single(m, alt) == pytest.approx(
            derive_sigma_single(m, base), rel=1e-12)
    for a, b in ((1e-26, 3e-26), (5e-25, 7e-24)):
        assert derive_sigma_pair(a, b, alt) == pytest.approx(
            derive_sigma_pair(a, b, base), rel=1e-12)


def test_reference_mass_degeneracy_of_predictions():
    # the degeneracy must survive through actual observables: forces,
    # heating power and coherence rates at fixed physical inputs
    import numpy as np
    from ccgsim import (ParticleConfig, mean_force,
                        moment_rate_contributions, two_mass_rate)
    base = CCGParams(gamma=3.0, sigma0=2.0e-7, m0=4.0e-26)
    c = 0.37
    alt = CCGParams(gamma=3.0, sigma0=base.sigma0 / math.sqrt(c), m0=c * base.m0)
    masses = np.array([5e-26, 2e-25])
    pos = np.array([[0.0, 0.0, 0.0], [6e-7, 2e-7, 0.0]])
    cfg = ParticleConfig(masses, pos)
    f_base = mean_force(cfg, 0, base)
    f_alt = mean_force(cfg, 0, alt)
    assert np.allclose(f_base, f_alt, rtol=1e-12)
    b_base, _ = moment_rate_contributions(cfg, base)
    b_alt, _ = moment_rate_contributions(cfg, alt)
    assert np.allclose(b_base, b_alt, rtol=1e-12)
    r = np.array([5e-6, 0.0, 0.0])
    rp = np.array([5.5e-6, 0.0, 0.0])
    assert two_mass_rate(r, rp, *masses, base).value == pytest.approx(
        two_mass_rate(r, rp, *masses, alt).value, rel=1e-12)
