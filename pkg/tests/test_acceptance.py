"""Acceptance suite: every exit criterion with one PASS/FAIL line.

Tolerances are pinned here; the stochastic criteria run at fixed seeds
so the whole suite is deterministic.  Runtime is dominated by the two
trajectory-ensemble criteria (a few minutes together on one core).
"""

import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import erf, erfc

from ccgsim import (CCGParams, ConfinedTwoMassSetup, MCSettings, ParticleConfig,
                    SphereSpec, compare_with_trajectories, derive_sigma_pair,
                    diffusion_far, diffusion_mc, force_jacobian,
                    force_jacobian_asymmetry, gaussian_packet, mean_force,
                    run_ensemble, smeared_force_oracle, sphere_pair_rate_mc,
                    sphere_test_potential, two_mass_rate)
from ccgsim.channel import channel_1p_decay_rate
from ccgsim.decoherence import R_factor, f_deviation, smeared_pair_potential
from ccgsim.grids import GridAxis

from conftest import rand_config

P1 = CCGParams(1.0, 1.0, 1.0, G=1.0, hbar=1.0)


def report(name: str, passed: bool, detail: str = "") -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, f"{name}: {detail}"


def test_newton_recovery():
    # The force suppression at r = 10 sigma_nk is Gaussian small; the
    # exact value from the erf-complement expansion is
    # erfc(5) + (2/sqrt(pi)) 5 exp(-25) = 7.99e-11, so the deviation is
    # pinned against that value rather than a loose bound.
    sigma = derive_sigma_pair(1.0, 1.0, P1)
    r = 10.0 * sigma
    cfg = ParticleConfig(np.array([1.0, 1.0]),
                         np.array([[0, 0, 0], [r, 0, 0.0]]))
    f = mean_force(cfg, 0, P1)[0]
    dev = f / (P1.G / r**2) - 1.0
    exact = -(erfc(5.0) + 2.0 / math.sqrt(math.pi) * 5.0 * math.exp(-25.0))
    ok = abs(dev) <= 1.0e-10 and abs(dev / exact - 1.0) <= 1e-3
    report("newton-recovery", ok,
           f"deviation {dev:.3e}, exact {exact:.3e}")


def test_smearing_identity():
    sigma = derive_sigma_pair(1.0, 1.0, P1)
    worst = 0.0
    for fac in (0.5, 2.0, 10.0):
        cfg = ParticleConfig(np.array([1.0, 1.0]),
                             np.array([[0, 0, 0], [fac * sigma, 0, 0.0]]))
        fo = smeared_force_oracle(cfg, 0, P1)[0]
        fm = mean_force(cfg, 0, P1)[0]
        worst = max(worst, abs(fo / fm - 1.0))
    report("smearing-identity", worst <= 1e-8, f"worst rel dev {worst:.2e}")


def _heating_slope(mass, grid_n, grid_dx, width, n_traj, seed):
    ax = GridAxis.centered(grid_n, grid_dx)
    wf = gaussian_packet([ax], [0.0], [width], [0.0], [mass], P1.hbar)
    ens = run_ensemble(wf, 2.0, 0.1, P1, n_traj, master_seed=seed,
                       output_times=[0.0, 2.0])
    de = ens.observables["ekin"][:, -1] - ens.observables["ekin"][:, 0]
    slope = de.mean() / 2.0
    se = de.std(ddof=1) / math.sqrt(len(de)) / 2.0
    return slope, se


def test_heating_power():
    # free 1D particle: kinetic energy grows at hbar^2 gamma / 8 m0
    # sigma0^2 (= 1/8 internal) independent of mass
    target = 0.125
    s1, e1 = _heating_slope(1.0, 384, 0.125, 1.0, 10000, seed=2024)
    s2, e2 = _heating_slope(100.0, 640, 0.02, 0.5, 10000, seed=2025)
    ok1 = abs(s1 - target) <= 2.0 * e1
    ok2 = abs(s2 - target) <= 2.0 * e2
    joint = abs(s1 - s2) <= 2.0 * math.hypot(e1, e2)
    report("heating-power", ok1 and ok2 and joint,
           f"m0: {s1:.4f}+-{e1:.4f}, 100 m0: {s2:.4f}+-{e2:.4f}, target {target}")


def test_single_particle_decoherence():
    # deterministic kernel against the analytic decay at five probe
    # separations, and against an independent overlap quadrature
    from scipy.integrate import quad
    sigma = 1.0
    worst = 0.0
    for d in (0.5, 1.5, 3.0, 6.0, 12.0):
        analytic = P1.gamma * (1.0 - math.exp(-d**2 / (8.0 * sigma**2)))
        got = float(channel_1p_decay_rate(d, sigma, P1))
        overlap, _ = quad(lambda z: math.exp(-(z**2 + (d - z)**2) / (4 * sigma**2))
                          / math.sqrt(2 * math.pi * sigma**2), -50, 50,
                          epsabs=1e-13)
        oracle = P1.gamma * (1.0 - overlap)
        worst = max(worst, abs(got / analytic - 1.0) if analytic else 0.0,
                    abs(got - oracle) / P1.gamma)
    report("single-particle-decoherence", worst <= 1e-6, f"worst {worst:.2e}")


def test_com_reduction():
    from ccgsim import GridDensityMatrix, com_reduction_check
    worst = 0.0
    for ratio in (1.0, 3.0):
        for coupling in (1e-300, 2.0):
            p = CCGParams(1.0, 1.0, 1.0, G=coupling, hbar=1.0)
            ax1 = GridAxis.centered(36, 0.25, -1.5)
            ax2 = GridAxis.centered(36, 0.25, +1.5)
            wf = gaussian_packet([ax1, ax2], [-1.5, 1.5], [1.3, 1.1],
                                 [0.2, -0.1], [1.0, ratio], p.hbar)
            gap = com_reduction_check(GridDensityMatrix.from_wavefunction(wf), p)
            worst = max(worst, gap)
    report("com-reduction", worst <= 1e-8, f"worst trace-norm gap {worst:.2e}")


def test_diffusion_far_field():
    # Heavy constituents so the pair resolution sits far below the
    # separation: the rank-one far form then agrees with the record
    # average inside the Monte Carlo error of the dominant entries, and
    # the transverse variance entries it drops stay below that band.
    cfg = ParticleConfig(np.array([1000.0, 1000.0]),
                         np.array([[0, 0, 0], [20.0, 0, 0.0]]))
    est = diffusion_mc(cfg, P1, MCSettings(n_samples=100000, seed=42))
    far = diffusion_far(cfg, P1)
    diff = np.abs(est.value - far.blocks)
    se_max = float(np.max(est.std_error))
    xx = np.s_[:, :, 0, 0]
    ok = float(np.max(diff)) <= 3.0 * se_max \
        and bool(np.all(diff[xx] <= 3.0 * est.std_error[xx]))
    report("diffusion-far-field", ok,
           f"max dev {np.max(diff):.3e} vs 3 se {3 * se_max:.3e}")


def test_jacobian_symmetry():
    rng = np.random.default_rng(99)
    p = CCGParams(1.0, 1.0, 1.0, G=40.0, hbar=1.0)
    worst = 0.0
    for i in range(10):
        cfg = rand_config(rng, 2 + i % 3)
        jac = force_jacobian(cfg, p)
        asym = force_jacobian_asymmetry(cfg, p)
        worst = max(worst, asym / float(np.max(np.abs(jac))))
    report("jacobian-symmetry", worst <= 1e-8, f"worst relative asymmetry {worst:.2e}")


def test_ktm_consistency():
    params = CCGParams(1.0, 1.0, 1.0, G=100.0, hbar=1.0)
    base = dict(mass=1.0, separation=8.5, stiffness=30.9, packet_width=0.3,
                duration=0.8, dt=8.1e-3, seed=71, n_outputs=9)
    pos = compare_with_trajectories(ConfinedTwoMassSetup(
        displacement=0.05, grid_n=224, grid_dx=0.05, n_traj=10000, **base), params)
    neg = compare_with_trajectories(ConfinedTwoMassSetup(
        displacement=2.0, grid_n=448, grid_dx=0.035, n_traj=4000, **base), params)
    worst_pos = max(v["max_ratio"] for v in pos["observables"].values())
    worst_neg = max(v["max_ratio"] for v in neg["observables"].values())
    ok = pos["agrees"] and not neg["agrees"] and worst_neg > 1.5
    report("ktm-consistency", ok,
           f"confined ratio {worst_pos:.2f} (pass), stretched ratio {worst_neg:.2f} (detect)")


def test_two_mass_versus_two_sphere():
    a = SphereSpec.build(32.0, 5.0, 8)
    b = SphereSpec.build(32.0, 5.0, 8)
    r_plus = np.array([250.0, 0.0, 0.0])
    r_minus = np.array([0.5, 0.2, 0.0])
    est = sphere_pair_rate_mc(a, b, r_plus, r_minus, P1,
                              MCSettings(n_samples=100000, seed=42))
    tm = two_mass_rate(r_plus + r_minus / 2, r_plus - r_minus / 2,
                       32.0, 32.0, P1)
    ok = abs(est.value.real - tm.value.real) <= 3.0 * est.std_error.real \
        and abs(est.value.imag - tm.value.imag) <= 3.0 * est.std_error.imag
    report("two-mass-vs-two-sphere", ok,
           f"sphere {est.value:.5e}, point {tm.value:.5e}")


def test_shape_factor_limits():
    newton = R_factor(0.01, 3.0)
    ok1 = abs(newton - 1.0) <= 1e-3
    # poor-resolution phase coefficient G M^2 / (12 sqrt(2 pi) sigma^3)
    sigma, rp = 8.0, 0.8
    h = 0.05 * rp
    pot = lambda r: smeared_pair_potential(r, 1.0, 1.0, sigma, P1, abs_tol=1e-13)
    d1 = (pot(rp + h) - pot(rp - h)) / (2 * h)
    d2 = (pot(rp + h / 2) - pot(rp - h / 2)) / h
    deriv = (4 * d2 - d1) / 3
    target = -rp / (12.0 * math.sqrt(2.0 * math.pi) * sigma**3)
    ok2 = abs(deriv / target - 1.0) <= 0.01
    report("shape-factor-limits", ok1 and ok2,
           f"separated-limit {newton:.6f}, suppression coeff rel dev "
           f"{abs(deriv / target - 1.0):.4f}")


def test_sphere_potential():
    total, radius = 4.0e6, 1.0
    sphere = SphereSpec.build(total, radius, 10000)
    dm = sphere.constituent_mass
    m_test = 1.0e6
    sigma_s = derive_sigma_pair(m_test, dm, P1)
    z = radius + 2.0 * sigma_s
    d = np.linalg.norm(sphere.positions - np.array([0, 0, z]), axis=1)
    brute = float(np.sum(P1.G * m_test * dm * erf(d / (2 * sigma_s)) / d))
    closed = sphere_test_potential(z, total, radius, m_test, dm, P1)
    ok = abs(closed / brute - 1.0) <= 5e-3 and f_deviation(radius, radius, sigma_s) == 0.5
    report("sphere-potential", ok,
           f"lattice rel dev {abs(closed / brute - 1.0):.2e} "
           f"(n={sphere.count}), surface profile {f_deviation(radius, radius, sigma_s)}")


def test_reproducibility(tmp_path):
    # every seeded experiment writes byte-identical artifacts across
    # repeat runs and across thread counts 1 and 8
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        'params:\n  gamma: "4.2e5 1/s"\n  sigma0: "5.0e-8 m"\n'
        '  m0: "1.0e-25 kg"\nseed: 42\n')
    cases = [
        ("two-sphere-rate", ["--set", "two-sphere-rate.samples=4000",
                             "--set", "two-sphere-rate.r_points=2"]),
        ("diffusion", ["--set", "diffusion.samples=20000"]),
        ("trajectories", ["--set", "trajectories.n_traj=64"]),
    ]
    ok = True
    detail = []
    for name, extra in cases:
        outs = []
        for run, threads in (("a", "1"), ("b", "1"), ("c", "8")):
            out = tmp_path / f"{name}-{run}"
            code = subprocess.run(
                [sys.executable, "-m", "ccgsim.cli", "--config", str(cfg),
                 "--experiment", name, "--out", str(out),
                 "--threads", threads] + extra,
                capture_output=True, text=True).returncode
            assert code == 0
            files = sorted(out.iterdir())
            outs.append(b"".join(f.read_bytes() for f in files))
        same = outs[0] == outs[1] == outs[2]
        ok &= same
        detail.append(f"{name}:{'=' if same else '!='}")
    report("reproducibility", ok, " ".join(detail))
