"""Fast cross-check suite behind the verify experiment.

Each check exercises one module against an independent oracle at a
fixed internal-unit working point and reports a scalar diagnostic.
The suite is meant to finish in well under a minute; the heavyweight
ensemble comparisons live in the test suite instead.
"""

from __future__ import annotations

import math
import tempfile

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, erfc

from .channel import (apply_channel_1p, channel_1p_decay_rate,
                      channel_2p_generator, com_reduction_check)
from .csvio import read_csv, write_csv
from .decoherence import (R_factor, SphereSpec, f_deviation, force_near_sphere,
                          sphere_test_potential, two_mass_rate)
from .diffusion import DiffusionTensor, diffusion_far, diffusion_mc
from .gravity import (ParticleConfig, force_jacobian, force_jacobian_asymmetry,
                      mean_force, mean_forces, smeared_force_oracle)
from .grids import GridAxis, GridDensityMatrix, gaussian_packet
from .mc import MCSettings
from .params import CCGParams, derive_sigma_pair, derive_sigma_single, from_internal, to_internal

__all__ = ["run_verification"]

P_UNIT = CCGParams(1.0, 1.0, 1.0, G=1.0, hbar=1.0)


def _two_body(sep, m=1.0, g=1.0):
    return ParticleConfig(np.array([m, m]),
                          np.array([[0.0, 0.0, 0.0], [sep, 0.0, 0.0]]))


def run_verification(params: CCGParams, seed: int = 0, threads: int = 1) -> list:
    """Run every check; returns (name, passed, value, detail) tuples."""
    checks = []

    def check(name, value, bound, detail=""):
        ok = bool(value <= bound)
        checks.append((name, ok, float(value), f"{detail} value {value:.3e} bound {bound:.0e}"))

    # resolution scalings
    p = P_UNIT
    v = abs(derive_sigma_single(4.0, p) - 0.5) \
        + abs(derive_sigma_pair(2.0, 2.0, p) - 1.0) \
        + abs(derive_sigma_pair(1.0, 1.0, p) - math.sqrt(2.0))
    check("resolution-scalings", v, 1e-14, "mass scaling identities;")

    # unit round trip on the caller's parameters
    rt = 0.0
    for role, val in (("length", 3.2), ("energy", 0.7), ("momentum", 1.9),
                      ("force", 2.4), ("gravitational_constant", 5.5)):
        rt = max(rt, abs(from_internal(params, to_internal(params, val, role), role)
                         / val - 1.0))
    check("unit-round-trip", rt, 1e-12, "to/from internal;")

    # far-field force recovery at ten pair resolutions
    sigma12 = derive_sigma_pair(1.0, 1.0, p)
    r = 10.0 * sigma12
    f = mean_force(_two_body(r), 0, p)[0]
    dev = abs(f / (p.G / r**2) - 1.0)
    expected = erfc(5.0) + 2.0 / math.sqrt(math.pi) * 5.0 * math.exp(-25.0)
    check("force-newton-recovery", abs(dev / expected - 1.0), 2e-5,
          f"suppression {dev:.3e} vs exact {expected:.3e};")

    # smearing identity against the quadrature oracle
    cfg = _two_body(2.0 * sigma12)
    fo = smeared_force_oracle(cfg, 0, p)
    fm = mean_force(cfg, 0, p)
    check("force-smearing-identity", abs(fo[0] / fm[0] - 1.0), 1e-8)

    # momentum conservation on a random four-body configuration
    rng = np.random.default_rng(777)
    cfg4 = ParticleConfig(rng.uniform(0.5, 3.0, 4), rng.uniform(-5, 5, (4, 3)))
    forces = mean_forces(cfg4, p)
    check("force-action-reaction", float(np.max(np.abs(forces.sum(axis=0))))
          / float(np.max(np.abs(forces))), 1e-12)

    # force-gradient symmetry
    cfg3 = ParticleConfig(rng.uniform(0.5, 3.0, 3), rng.uniform(-4, 4, (3, 3)))
    pg = CCGParams(1.0, 1.0, 1.0, G=40.0, hbar=1.0)
    jac = force_jacobian(cfg3, pg)
    check("force-gradient-symmetry",
          force_jacobian_asymmetry(cfg3, pg) / float(np.max(np.abs(jac))), 1e-8)

    # single-particle channel against the overlap-integral oracle
    worst = 0.0
    for d in (0.8, 2.0, 5.0):
        val, _ = quad(lambda z: math.exp(-(z**2 + (d - z)**2) / 4.0)
                      / math.sqrt(2.0 * math.pi), -40, 40, epsabs=1e-13)
        ana = math.exp(-d**2 / 8.0)
        rate = float(channel_1p_decay_rate(d, 1.0, p))
        worst = max(worst, abs(val - ana), abs(rate - (1.0 - ana)))
    check("channel-kernel-oracle", worst, 1e-10)

    # two-particle generator against the far-field closed form
    pk = CCGParams(1.0, 1.0, 1.0, G=10.0, hbar=1.0)
    dx = 0.25
    ax1 = GridAxis(n=8, dx=dx, origin=19.75)
    ax2 = GridAxis(n=8, dx=dx, origin=-21.0)
    rho = GridDensityMatrix((ax1, ax2), np.zeros((8, 8, 8, 8), dtype=complex),
                            np.array([1.0, 1.0]))
    gen = channel_2p_generator(rho, pk)
    rr, rrp = 40.0, 40.5
    i1 = int(round((rr / 2 - ax1.origin) / dx))
    j1 = int(round((rrp / 2 - ax1.origin) / dx))
    i2 = int(round((-rr / 2 - ax2.origin) / dx))
    j2 = int(round((-rrp / 2 - ax2.origin) / dx))
    kernel_rate = -gen[i1, i2, j1, j2]
    closed = two_mass_rate(np.array([rr, 0, 0]), np.array([rrp, 0, 0]),
                           1.0, 1.0, pk)
    check("pair-kernel-far-field", abs(kernel_rate - closed.value) / pk.gamma, 1e-6)

    # far-field diffusion dyadic identity and positivity
    cfg = ParticleConfig(np.array([2.0, 3.0]),
                         np.array([[0, 0, 0], [7.0, 0, 0.0]]))
    a = diffusion_far(cfg, p)
    qmag = p.G * 6.0 / 49.0
    dev = abs(a.blocks[0, 0, 0, 0] - qmag**2) + abs(a.blocks[0, 1, 0, 0] + qmag**2)
    check("diffusion-far-dyadic", dev / qmag**2, 1e-12,
          f"psd={a.is_psd()};")

    # record-average diffusion: determinism and thread invariance
    cfgh = _two_body(20.0, m=1000.0)
    e1 = diffusion_mc(cfgh, p, MCSettings(n_samples=20000, seed=seed + 1, threads=1))
    e2 = diffusion_mc(cfgh, p, MCSettings(n_samples=20000, seed=seed + 1,
                                          threads=max(2, threads)))
    ident = 0.0 if np.array_equal(e1.value, e2.value) else 1.0
    far = diffusion_far(cfgh, p)
    agree = float(np.max(np.abs(e1.value - far.blocks))) \
        / max(float(np.max(e1.std_error)), 1e-300)
    check("diffusion-mc-reproducible", ident, 0.5, f"far-vs-mc {agree:.1f} se;")

    # center-of-mass reduction for both mass ratios with coupling on
    pc = CCGParams(1.0, 1.0, 1.0, G=2.0, hbar=1.0)
    worst = 0.0
    for ratio in (1.0, 3.0):
        axa = GridAxis.centered(28, 0.28, -1.4)
        axb = GridAxis.centered(28, 0.28, +1.4)
        wf = gaussian_packet([axa, axb], [-1.4, 1.4], [1.2, 1.0], [0.2, -0.1],
                             [1.0, ratio], pc.hbar)
        worst = max(worst, com_reduction_check(
            GridDensityMatrix.from_wavefunction(wf), pc))
    check("com-reduction", worst, 1e-8)

    # sphere-sphere shape factor limits
    check("shape-factor-newton-limit", abs(R_factor(0.01, 3.0) - 1.0), 1e-3)
    sigma_s = 8.0
    h = 0.04
    from .decoherence import smeared_pair_potential
    pot = lambda rr_: smeared_pair_potential(rr_, 1.0, 1.0, sigma_s, p, abs_tol=1e-13)
    d1 = (pot(0.8 + h) - pot(0.8 - h)) / (2 * h)
    d2 = (pot(0.8 + h / 2) - pot(0.8 - h / 2)) / h
    deriv = (4 * d2 - d1) / 3
    target = -0.8 / (12.0 * math.sqrt(2.0 * math.pi) * sigma_s**3)
    check("shape-factor-suppression", abs(deriv / target - 1.0), 1e-2)

    # sphere surface profile and closed form against the continuum integral
    check("surface-profile-at-surface", abs(f_deviation(1.0, 1.0, 0.05) - 0.5), 1e-15)
    m_t, dm, big_m, rad = 1.0e6, 400.0, 4.0e6, 1.0
    sig_s = derive_sigma_pair(m_t, dm, p)
    z = rad + 2.0 * sig_s

    def integrand(r):
        t1 = -(z - r) * erf((z - r) / (2 * sig_s)) \
            - 2 * sig_s / math.sqrt(math.pi) * math.exp(-(r - z)**2 / (4 * sig_s**2))
        t2 = (z + r) * erf((z + r) / (2 * sig_s)) \
            + 2 * sig_s / math.sqrt(math.pi) * math.exp(-(r + z)**2 / (4 * sig_s**2))
        return (r / z) * (t1 + t2)
    cont, _ = quad(integrand, 0, rad, epsabs=1e-14, limit=400)
    cont *= 2 * math.pi * p.G * big_m * m_t / (4 * math.pi * rad**3 / 3)
    closed = sphere_test_potential(z, big_m, rad, m_t, dm, p)
    check("sphere-potential-continuum", abs(closed / cont - 1.0), 1e-9)
    fd = (sphere_test_potential(z + 1e-5, big_m, rad, m_t, dm, p)
          - sphere_test_potential(z - 1e-5, big_m, rad, m_t, dm, p)) / 2e-5
    an = force_near_sphere(z, big_m, rad, m_t, dm, p)
    check("sphere-force-derivative", abs(fd / an - 1.0), 1e-6)

    # csv round trip
    with tempfile.TemporaryDirectory() as tmp:
        path = f"{tmp}/t.csv"
        rows = [[1.0, math.pi], [2.0, -1.25e-17]]
        write_csv(path, {"a": 1, "b": "x"}, ["u", "v"], ["1", "sigma0"], rows)
        back = read_csv(path)
        ok = (back.columns == ["u", "v"] and np.array_equal(back.data, np.array(rows)))
        check("csv-round-trip", 0.0 if ok else 1.0, 0.5)

    return checks
