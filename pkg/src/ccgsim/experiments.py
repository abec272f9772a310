"""Experiment catalog behind the command line.

Each experiment consumes a validated settings block, runs in internal
units, and returns one or more tables.  Settings blocks reject unknown
keys so typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from .channel import apply_channel_1p, channel_1p_decay_rate, com_reduction_check
from .csvio import write_csv
from .decoherence import (R_factor, SphereSpec, f_deviation,
                          sphere_pair_rate_mc, sphere_test_potential,
                          two_mass_rate)
from .diffusion import diffusion_far, diffusion_mc
from .errors import ConfigError
from .gravity import ParticleConfig, mean_force, smeared_force_oracle
from .grids import GridAxis, GridDensityMatrix, gaussian_packet
from .ktm import GaussianMomentState, build_generator, moment_series
from .mc import MCSettings
from .params import CCGParams, derive_sigma_pair, derive_sigma_single
from .trajectories import run_ensemble

__all__ = ["EXPERIMENTS", "ExperimentSpec", "run_experiment", "catalog"]


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    run: Callable
    description: str
    formulas: str
    settings: dict  # key -> (default or REQUIRED, brief doc)


REQUIRED = object()


def _resolve_settings(spec: ExperimentSpec, block: dict) -> dict:
    block = dict(block or {})
    out = {}
    for key, (default, _doc) in spec.settings.items():
        if key in block:
            out[key] = block.pop(key)
        elif default is REQUIRED:
            raise ConfigError(f"{spec.name}: missing required setting {key!r}")
        else:
            out[key] = default
    if block:
        raise ConfigError(f"{spec.name}: unknown settings {sorted(block)}")
    return out


def _grid_scan(s: dict, prefix: str) -> np.ndarray:
    start, stop, points = s[f"{prefix}_start"], s[f"{prefix}_stop"], s[f"{prefix}_points"]
    if points < 2 or stop <= start:
        raise ConfigError(f"bad scan range for {prefix}")
    if s.get(f"{prefix}_log", False):
        return np.geomspace(start, stop, int(points))
    return np.linspace(start, stop, int(points))


# ---------------------------------------------------------------- force-scan

def _run_force_scan(s, params, seed, threads):
    m1, m2 = float(s["mass_1"]), float(s["mass_2"])
    sigma = derive_sigma_pair(m1, m2, params)
    rs = _grid_scan(s, "r") * sigma
    rows = []
    for r in rs:
        cfg = ParticleConfig(np.array([m1, m2]),
                             np.array([[0.0, 0.0, 0.0], [r, 0.0, 0.0]]))
        f = mean_force(cfg, 0, params)[0]
        newton = params.G * m1 * m2 / r**2
        rows.append([r / sigma, f, newton, f / newton - 1.0])
    return [("force_scan", ["r_over_sigma_nk", "f_reg", "f_newton", "rel_deviation"],
             ["1", "m0*sigma0*gamma^2", "m0*sigma0*gamma^2", "1"], rows)]


# ----------------------------------------------------------------- diffusion

def _run_diffusion(s, params, seed, threads):
    m1, m2, sep = float(s["mass_1"]), float(s["mass_2"]), float(s["separation"])
    cfg = ParticleConfig(np.array([m1, m2]),
                         np.array([[0.0, 0.0, 0.0], [sep, 0.0, 0.0]]))
    far = diffusion_far(cfg, params)
    est = diffusion_mc(cfg, params, MCSettings(n_samples=int(s["samples"]),
                                               seed=seed, threads=threads))
    rows = []
    for n in range(2):
        for k in range(2):
            for a in range(3):
                for b in range(3):
                    rows.append([n, k, a, b, far.blocks[n, k, a, b],
                                 est.value[n, k, a, b], est.std_error[n, k, a, b]])
    return [("diffusion", ["n", "k", "axis_a", "axis_b", "a_far", "a_mc", "a_mc_se"],
             ["1", "1", "1", "1", "sigma0^-2", "sigma0^-2", "sigma0^-2"], rows)]


# ---------------------------------------------------------------- channel-1p

def _run_channel_1p(s, params, seed, threads):
    m = float(s["mass"])
    sigma = derive_sigma_single(m, params)
    n, dx = int(s["grid_n"]), float(s["grid_dx"])
    ax = GridAxis.centered(n, dx)
    wf = gaussian_packet([ax], [0.0], [float(s["width"])], [0.0], [m], params.hbar)
    rho = GridDensityMatrix.from_wavefunction(wf)
    dt = float(s["dt"])
    out = apply_channel_1p(rho, m, params, dt)
    i0 = n // 2
    rows = []
    for j in range(i0 + 1, n, max(1, (n - i0 - 1) // int(s["points"]))):
        sep = ax.points[j] - ax.points[i0]
        num = -math.log(abs(out.rho[i0, j]) / abs(rho.rho[i0, j])) / dt
        ana = float(channel_1p_decay_rate(sep, sigma, params))
        rows.append([sep, num, ana, num / ana - 1.0 if ana else 0.0])
    return [("channel_1p", ["separation", "rate_numeric", "rate_analytic", "rel_error"],
             ["sigma0", "gamma", "gamma", "1"], rows)]


# -------------------------------------------------------------- trajectories

def _run_trajectories(s, params, seed, threads):
    m = float(s["mass"])
    duration = float(s["duration"])
    sig = derive_sigma_single(m, params)
    hb = params.hbar
    # Auto-sized grid. A measurement can collapse the packet to about
    # the resolution, after which it re-spreads at hbar / 2 m sigma
    # until the next event; the envelope must hold a few such excursions
    # on top of the initial dispersion, and the spacing must resolve
    # both the resolution and the collapsed momentum content.
    width = float(s["width"]) or math.sqrt(hb * duration / (2.0 * m)) + sig
    dk_heat = math.sqrt(params.gamma * duration) / (2.0 * sig)
    k_need = 5.0 * (2.5 / sig + 1.0 / (2.0 * width) + dk_heat)
    dx = float(s["grid_dx"]) or min(0.5 * sig, math.pi / (2.0 * k_need))
    t_free = min(duration, 1.5 / params.gamma)
    jump_excursion = 5.0 * hb * t_free / (2.0 * m * sig)
    spread0 = math.sqrt(width**2 + (hb * duration / (2 * m * width))**2)
    extent = 5.0 * spread0 + (params.gamma * duration + 1.0) * jump_excursion \
        + 10.0 * sig
    n = int(s["grid_n"]) or 1 << max(6, math.ceil(math.log2(2.0 * extent / dx)))
    if n > (1 << 17):
        raise ConfigError(
            "auto-sized grid is impractically large at this parameter point; "
            "set grid_n, grid_dx and width explicitly")
    ax = GridAxis.centered(n, dx)
    wf = gaussian_packet([ax], [0.0], [width], [0.0], [m], params.hbar)
    times = np.linspace(0.0, float(s["duration"]), int(s["outputs"]))
    ens = run_ensemble(wf, float(s["duration"]), float(s["dt"]), params,
                       int(s["n_traj"]), master_seed=seed, output_times=times,
                       threads=threads)
    ek, ek_se = ens.mean("ekin")
    p2, p2_se = ens.mean("p2_0")
    x2, x2_se = ens.mean("x2_0")
    rows = [[t, a, b, c, d, e, f] for t, a, b, c, d, e, f
            in zip(times, ek, ek_se, p2, p2_se, x2, x2_se)]
    return [("heating", ["t", "ekin", "ekin_se", "p2", "p2_se", "x2", "x2_se"],
             ["1/gamma", "m0*sigma0^2*gamma^2", "m0*sigma0^2*gamma^2",
              "(m0*sigma0*gamma)^2", "(m0*sigma0*gamma)^2", "sigma0^2", "sigma0^2"],
             rows)]


# ----------------------------------------------------------------- com-check

def _run_com_check(s, params, seed, threads):
    n, dx = int(s["grid_n"]), float(s["grid_dx"])
    rows = []
    for ratio in (1.0, float(s["mass_ratio"])):
        for coupling_on in (0.0, 1.0):
            p = params if coupling_on else CCGParams(
                params.gamma, params.sigma0, params.m0, G=1e-300, hbar=params.hbar)
            ax1 = GridAxis.centered(n, dx, -float(s["separation"]) / 2)
            ax2 = GridAxis.centered(n, dx, +float(s["separation"]) / 2)
            wf = gaussian_packet(
                [ax1, ax2], [-float(s["separation"]) / 2, float(s["separation"]) / 2],
                [float(s["width_1"]), float(s["width_2"])], [0.2, -0.1],
                [1.0, ratio], p.hbar)
            rho2 = GridDensityMatrix.from_wavefunction(wf)
            gap = com_reduction_check(rho2, p)
            rows.append([ratio, p.chi if coupling_on else 0.0, gap])
    return [("com_check", ["mass_ratio", "chi", "trace_norm_gap"],
             ["1", "1", "1"], rows)]


# ---------------------------------------------------------------- ktm-evolve

def _run_ktm_evolve(s, params, seed, threads):
    m = float(s["mass"])
    sep = float(s["separation"])
    k = float(s["stiffness"])
    cfg = ParticleConfig(np.array([m, m]),
                         np.array([[-sep / 2, 0.0, 0.0], [sep / 2, 0.0, 0.0]]))
    gen = build_generator(cfg, params, external_stiffness=[k, k]).restricted_to_x(2)
    w = float(s["width"])
    d = float(s["displacement"])
    mean0 = np.array([-sep / 2 - d / 2, sep / 2 + d / 2, 0.0, 0.0])
    cov0 = np.diag([w**2, w**2, params.hbar**2 / (4 * w**2),
                    params.hbar**2 / (4 * w**2)])
    times = np.linspace(0.0, float(s["duration"]), int(s["outputs"]))
    series = moment_series(GaussianMomentState(mean0, cov0), gen, times,
                           dt=float(s["dt"]))
    rows = []
    for t, st in zip(times, series):
        rows.append([t, st.mean[0], st.mean[1], st.mean[2], st.mean[3],
                     st.cov[0, 0], st.cov[1, 1], st.cov[2, 2], st.cov[3, 3],
                     st.cov[0, 1], st.cov[2, 3]])
    return [("ktm_moments",
             ["t", "x0", "x1", "p0", "p1", "var_x0", "var_x1", "var_p0",
              "var_p1", "cov_x01", "cov_p01"],
             ["1/gamma", "sigma0", "sigma0", "m0*sigma0*gamma", "m0*sigma0*gamma",
              "sigma0^2", "sigma0^2", "(m0*sigma0*gamma)^2", "(m0*sigma0*gamma)^2",
              "sigma0^2", "(m0*sigma0*gamma)^2"], rows)]


# -------------------------------------------------------------- two-mass-rate

def _run_two_mass_rate(s, params, seed, threads):
    m1, m2 = float(s["mass_1"]), float(s["mass_2"])
    delta = float(s["branch_offset"])
    rows = []
    for sep in _grid_scan(s, "r"):
        r = np.array([sep, 0.0, 0.0])
        rp = np.array([sep + delta, 0.0, 0.0])
        out = two_mass_rate(r, rp, m1, m2, params)
        rows.append([sep, out.value.real, out.value.imag,
                     1.0 if out.in_validity_regime else 0.0])
    return [("rate_curve", ["separation", "rate_re", "rate_im", "valid"],
             ["sigma0", "gamma", "gamma", "1"], rows)]


# ------------------------------------------------------------ two-sphere-rate

def _run_two_sphere_rate(s, params, seed, threads):
    sphere = SphereSpec.build(float(s["total_mass"]), float(s["radius"]),
                              int(s["constituents"]))
    r_minus = np.array([float(s["branch_offset"]), 0.0, 0.0])
    mc = MCSettings(n_samples=int(s["samples"]), seed=seed, threads=threads)
    rows = []
    for sep in _grid_scan(s, "r"):
        est = sphere_pair_rate_mc(sphere, sphere, np.array([sep, 0.0, 0.0]),
                                  r_minus, params, mc)
        rows.append([sep, est.value.real, est.value.imag,
                     est.std_error.real, est.std_error.imag])
    return [("rate_curve", ["separation", "rate_re", "rate_im", "rate_re_se",
                            "rate_im_se"],
             ["sigma0", "gamma", "gamma", "gamma", "gamma"], rows)]


# ------------------------------------------------------------ sphere-potential

def _run_sphere_potential(s, params, seed, threads):
    total, radius = float(s["total_mass"]), float(s["radius"])
    dm = float(s["constituent_mass"])
    m = float(s["test_mass"])
    sigma_s = derive_sigma_pair(m, dm, params)
    rows = []
    for z in _grid_scan(s, "z"):
        pot = sphere_test_potential(z, total, radius, m, dm, params)
        newton = params.G * total * m / z
        rows.append([z, pot, newton, pot / newton - 1.0,
                     f_deviation(z, radius, sigma_s)])
    return [("potential_profile",
             ["z", "phi", "phi_newton", "rel_deviation", "f_profile"],
             ["sigma0", "m0*sigma0^2*gamma^2", "m0*sigma0^2*gamma^2", "1", "1"],
             rows)]


# ------------------------------------------------------------------ r-surface

def _run_r_surface(s, params, seed, threads):
    alphas = _grid_scan(s, "alpha")
    betas = _grid_scan(s, "beta")
    rows = []
    for a in alphas:
        for b in betas:
            rows.append([a, b, R_factor(float(a), float(b))])
    return [("r_surface", ["alpha", "beta", "r_factor"], ["1", "1", "1"], rows)]


# --------------------------------------------------------------------- verify

def _run_verify(s, params, seed, threads):
    from .verify import run_verification
    results = run_verification(params, seed=seed, threads=threads)
    rows = [[i, 1.0 if ok else 0.0, val]
            for i, (name, ok, val, _detail) in enumerate(results)]
    for name, ok, val, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return [("verify", ["check_index", "passed", "value"], ["1", "1", "1"], rows)]


EXPERIMENTS = {}


def _register(name, run, description, formulas, settings):
    EXPERIMENTS[name] = ExperimentSpec(name, run, description, formulas, settings)


_register(
    "force-scan", _run_force_scan,
    "Regularized mean force against the bare inverse-square law over a separation scan.",
    "erf-regularized pair potential; noise-averaged two-body force",
    {"mass_1": (1.0, "first mass [m0]"), "mass_2": (1.0, "second mass [m0]"),
     "r_start": (0.1, "scan start [sigma_nk]"), "r_stop": (20.0, "scan stop"),
     "r_points": (200, "scan points"), "r_log": (True, "log spacing")})
_register(
    "diffusion", _run_diffusion,
    "Feedback diffusion tensor: far-field closed form against the record-average estimate.",
    "kick-fluctuation second moments; far-field dyadic reduction",
    {"mass_1": (1000.0, "first mass [m0]"), "mass_2": (1000.0, "second mass"),
     "separation": (20.0, "pair separation [sigma0]"),
     "samples": (100000, "record samples")})
_register(
    "channel-1p", _run_channel_1p,
    "Single-particle coherence decay of the exact channel against the analytic kernel.",
    "Gaussian overlap decoherence kernel",
    {"mass": (1.0, "particle mass [m0]"), "grid_n": (128, "grid points"),
     "grid_dx": (0.25, "grid spacing [sigma0]"), "width": (1.5, "packet width"),
     "dt": (0.5, "channel step [1/gamma]"), "points": (24, "probe separations")})
_register(
    "trajectories", _run_trajectories,
    "Free-particle heating curve from a seeded stochastic trajectory ensemble.",
    "measurement-backaction momentum diffusion; event-stream unraveling",
    {"mass": (1.0, "particle mass [m0]"), "grid_n": (0, "grid points (0 = auto)"),
     "grid_dx": (0.0, "grid spacing (0 = auto)"), "width": (0.0, "packet width (0 = auto)"),
     "duration": (2.0, "run length [1/gamma]"), "dt": (0.1, "split step"),
     "outputs": (9, "output times"), "n_traj": (2000, "trajectories")})
_register(
    "com-check", _run_com_check,
    "Center-of-mass reduction identity on a two-particle grid state.",
    "composite-mass resolution scaling; feedback-phase cancellation",
    {"mass_ratio": (3.0, "second/first mass"), "separation": (3.0, "packet separation"),
     "width_1": (1.3, "first packet width"), "width_2": (1.1, "second packet width"),
     "grid_n": (36, "grid points"), "grid_dx": (0.25, "grid spacing")})
_register(
    "ktm-evolve", _run_ktm_evolve,
    "Gaussian moment propagation of the quadratic (confined) limit.",
    "mean-field force gradient; measurement and feedback diffusion",
    {"mass": (1.0, "particle mass [m0]"), "separation": (8.5, "equilibrium separation"),
     "stiffness": (30.9, "trap stiffness"), "width": (0.3, "packet width"),
     "displacement": (0.05, "initial stretch"), "duration": (0.8, "run length"),
     "dt": (0.002, "integrator step"), "outputs": (17, "output times")})
_register(
    "two-mass-rate", _run_two_mass_rate,
    "Complex coherence rate of a two-mass superposition over a separation scan.",
    "far-field superposition decay and phase accumulation",
    {"mass_1": (1.0, "first mass"), "mass_2": (1.0, "second mass"),
     "branch_offset": (1.0, "branch separation [sigma0]"),
     "r_start": (10.0, "scan start"), "r_stop": (60.0, "scan stop"),
     "r_points": (60, "points"), "r_log": (False, "log spacing")})
_register(
    "two-sphere-rate", _run_two_sphere_rate,
    "Monte Carlo coherence rate for two constituent spheres over a distance scan.",
    "record-averaged feedback phase factor; composite damping exponent",
    {"total_mass": (32.0, "sphere mass"), "radius": (5.0, "sphere radius"),
     "constituents": (8, "constituent count"),
     "branch_offset": (0.5, "branch separation"), "samples": (20000, "records"),
     "r_start": (150.0, "scan start"), "r_stop": (400.0, "scan stop"),
     "r_points": (6, "points"), "r_log": (False, "log spacing")})
_register(
    "sphere-potential", _run_sphere_potential,
    "Smeared sphere potential, its bare limit and surface deviation profile.",
    "near-surface potential reduction; deviation profile",
    {"total_mass": (4.0e6, "sphere mass"), "radius": (1.0, "sphere radius"),
     "constituent_mass": (400.0, "constituent mass"),
     "test_mass": (1.0e6, "test mass"),
     "z_start": (1.0, "scan start [sigma0]"), "z_stop": (1.6, "scan stop"),
     "z_points": (60, "points"), "z_log": (False, "log spacing")})
_register(
    "r-surface", _run_r_surface,
    "Shape factor of the smeared sphere-sphere potential on a resolution/distance grid.",
    "damped oscillatory shape integral",
    {"alpha_start": (0.05, "resolution/radius start"), "alpha_stop": (3.0, "stop"),
     "alpha_points": (16, "points"), "alpha_log": (True, "log spacing"),
     "beta_start": (0.3, "distance/radius start"), "beta_stop": (8.0, "stop"),
     "beta_points": (16, "points"), "beta_log": (False, "log spacing")})
_register(
    "verify", _run_verify,
    "Fast invariant suite; prints one PASS/FAIL line per check.",
    "cross-checks every module against its independent oracle",
    {})


def run_experiment(name: str, block: dict, params: CCGParams, seed: int,
                   threads: int, outdir, meta_extra=None) -> list:
    """Execute an experiment and write its tables under outdir.

    Returns the list of written paths.  All numerics run in the
    internal unit system of the supplied parameters.
    """
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; try one of {sorted(EXPERIMENTS)}")
    spec = EXPERIMENTS[name]
    settings = _resolve_settings(spec, block)
    internal = params.internal()
    tables = spec.run(settings, internal, seed, threads)
    meta = {f"{name}.{k}": v for k, v in sorted(settings.items())}
    meta.update({
        "experiment": name,
        "seed": seed,
        "version": __version__,
        "params.gamma_si": params.gamma,
        "params.sigma0_si": params.sigma0,
        "params.m0_si": params.m0,
        "params.G_si": params.G,
        "params.hbar_si": params.hbar,
        "params.chi": params.chi,
        "params.kappa": params.kappa,
        "units": "internal (m0, sigma0, 1/gamma)",
    })
    if meta_extra:
        meta.update(meta_extra)
    written = []
    import os
    os.makedirs(outdir, exist_ok=True)
    for stem, columns, units, rows in tables:
        path = os.path.join(outdir, f"{stem}.csv")
        write_csv(path, meta, columns, units, rows)
        written.append(path)
    return written


def catalog() -> list:
    """Experiment descriptions for the listing command."""
    out = []
    for name in sorted(EXPERIMENTS):
        spec = EXPERIMENTS[name]
        out.append({
            "name": name,
            "description": spec.description,
            "exercises": spec.formulas,
            "settings": {k: {"default": (None if v[0] is REQUIRED else v[0]),
                             "doc": v[1]}
                         for k, v in spec.settings.items()},
        })
    return out
