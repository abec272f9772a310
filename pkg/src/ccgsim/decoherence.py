"""Coherence rates and effective potentials for composite bodies.

Covers the complex decay rate of two-mass superpositions, its
generalization to rigid constituent spheres via Monte Carlo over the
record fluctuations, the first-order shape factor of the sphere-sphere
potential with its strongly damped oscillatory integral, and the
surface-gravity deviation profile of a large sphere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, erfc

from .errors import NumericalError
from .gravity import pair_force_scale
from .mc import MCEstimate, MCSettings, run_chunked
from .params import CCGParams, derive_sigma_pair, derive_sigma_single

__all__ = [
    "CoherenceRate",
    "two_mass_rate",
    "SphereSpec",
    "sphere_pair_rate_mc",
    "R_factor",
    "I_first_order",
    "sphere_test_potential",
    "f_deviation",
    "force_near_sphere",
]


@dataclass(frozen=True)
class CoherenceRate:
    """Complex coherence rate: real part decays, imaginary part rotates.

    The decay rate of an off-diagonal element sits in [0, 2 gamma]
    because the rate has the form gamma (1 - w) with |w| <= 1.
    """

    value: complex
    in_validity_regime: bool = True

    @property
    def decay(self) -> float:
        return self.value.real

    @property
    def phase_rate(self) -> float:
        return self.value.imag


def two_mass_rate(r, r_prime, m1: float, m2: float, params: CCGParams,
                  guard_factor: float = 5.0) -> CoherenceRate:
    """Complex rate for a superposition of relative vectors r, r'.

    gamma [1 - exp(-(r-r')^2 / 8 sigma12^2
                   - 4i G m1 m2 (r^2 - r'^2) / (gamma hbar |r+r'|^3))],
    valid for separations well beyond the pair resolution; closer
    inputs only clear the in_validity_regime flag.
    """
    r = np.asarray(r, dtype=float).reshape(3)
    rp = np.asarray(r_prime, dtype=float).reshape(3)
    sigma12 = derive_sigma_pair(m1, m2, params)
    rn, rpn = float(np.linalg.norm(r)), float(np.linalg.norm(rp))
    ok = min(rn, rpn) >= guard_factor * sigma12
    decay_exp = float((r - rp) @ (r - rp)) / (8.0 * sigma12**2)
    sum_norm = float(np.linalg.norm(r + rp))
    if sum_norm == 0.0:
        raise ValueError("coincident opposite branches: |r + r'| = 0")
    phase = 4.0 * params.G * m1 * m2 * (rn**2 - rpn**2) \
        / (params.gamma * params.hbar * sum_norm**3)
    value = params.gamma * (1.0 - np.exp(-decay_exp - 1j * phase))
    return CoherenceRate(value=complex(value), in_validity_regime=bool(ok))


@dataclass(frozen=True)
class SphereSpec:
    """Rigid ball of total mass split over a deterministic cubic lattice.

    Constituents carry equal mass total/count; the half-integer lattice
    is symmetric under reflections, so the center of mass sits exactly
    at the origin.  The spacing is chosen so the trimmed count lands as
    close as possible to the requested one.
    """

    total_mass: float
    radius: float
    count: int
    constituent_mass: float
    positions: np.ndarray

    @classmethod
    def build(cls, total_mass: float, radius: float, n_requested: int) -> "SphereSpec":
        if total_mass <= 0 or radius <= 0 or n_requested < 1:
            raise ValueError("positive mass, radius and count required")
        best = None
        # scan trim radii of the half-integer unit lattice; count(a) is
        # monotone in the trim, so a fine scan over the packing knob is
        # deterministic and reproducible
        base = _half_integer_lattice(int(math.ceil((3.0 * n_requested) ** (1 / 3))) + 2)
        radii = np.linalg.norm(base, axis=1)
        order = np.argsort(radii, kind="stable")
        radii_sorted = radii[order]
        # trimming after k-th shell gives count k; pick count closest to target
        counts = np.arange(1, len(radii_sorted) + 1)
        # only counts that include complete shells (equal radii stay together)
        valid = np.nonzero(np.diff(radii_sorted, append=np.inf) > 1e-9)[0]
        k = valid[np.argmin(np.abs(counts[valid] - n_requested))]
        n = int(counts[k])
        pts = base[order[:k + 1]]
        scale = radius / float(np.max(np.linalg.norm(pts, axis=1)))
        pts = pts * scale
        return cls(total_mass=float(total_mass), radius=float(radius), count=n,
                   constituent_mass=float(total_mass) / n, positions=pts)

    def __post_init__(self):
        pts = np.asarray(self.positions, dtype=float)
        if pts.shape != (self.count, 3):
            raise ValueError("positions must be (count, 3)")
        if self.count * self.constituent_mass <= 0:
            raise ValueError("positive masses required")
        if abs(self.count * self.constituent_mass - self.total_mass) \
                > 1e-12 * self.total_mass:
            raise ValueError("constituent masses must sum to the total")
        r = np.linalg.norm(pts, axis=1)
        if np.any(r > self.radius * (1 + 1e-12)):
            raise ValueError("constituents must fit inside the radius")
        com = pts.T @ np.full(self.count, self.constituent_mass) / self.total_mass
        if float(np.max(np.abs(com))) > 1e-10 * self.radius:
            raise ValueError("center of mass must sit at the origin")
        object.__setattr__(self, "positions", pts)

    def resolution(self, params: CCGParams) -> float:
        """Per-constituent record resolution sqrt(m0/dm) sigma0."""
        return derive_sigma_single(self.constituent_mass, params)


def _half_integer_lattice(n: int) -> np.ndarray:
    g = np.arange(-n, n) + 0.5
    xx, yy, zz = np.meshgrid(g, g, g, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)


def _sphere_rate_chunk(rng, n_samples, payload):
    a: SphereSpec = payload["a"]
    b: SphereSpec = payload["b"]
    params: CCGParams = payload["params"]
    r_plus = payload["r_plus"]
    r_minus = payload["r_minus"]
    sigma = a.resolution(params)
    sigma_pair = derive_sigma_pair(a.constituent_mass, b.constituent_mass, params)
    # pair offsets r+ + x_An - x_Bk, shape (Na, Nb, 3)
    offsets = r_plus[None, None, :] + a.positions[:, None, :] - b.positions[None, :, :]
    dm2 = a.constituent_mass * b.constituent_mass
    total = 0.0 + 0.0j
    total_sq = 0.0 + 0.0j
    block = max(1, int(4e5) // (a.count * b.count))
    done = 0
    while done < n_samples:
        take = min(block, n_samples - done)
        za = rng.standard_normal((take, a.count, 3)) * sigma
        zb = rng.standard_normal((take, b.count, 3)) * sigma
        v = offsets[None] - za[:, :, None, :] + zb[:, None, :, :]
        rr = np.sqrt(np.einsum("sabc,sabc->sab", v, v))
        s = pair_force_scale(rr, 1.0, 1.0, sigma_pair, params.G) * dm2
        grad = np.einsum("sab,sabc->sc", s, v)  # gradient of the pair-sum potential
        phase = grad @ r_minus / (params.hbar * params.gamma)
        w = np.exp(-1j * phase)
        total += w.sum()
        total_sq += (w.real**2).sum() + 1j * (w.imag**2).sum()
        done += take
    return np.array([total]), np.array([total_sq])


def sphere_pair_rate_mc(a: SphereSpec, b: SphereSpec, r_plus, r_minus,
                        params: CCGParams, mc: MCSettings,
                        overlap_guard: bool = True) -> MCEstimate:
    """Monte Carlo complex coherence rate for two constituent spheres.

    Estimates the Gaussian record average of the feedback phase factor
    and returns gamma (1 - exp(-N |r-|^2 / 16 sigma^2) <phase factor>)
    as a CoherenceRate value with propagated errors on both parts.
    Overlapping spheres (|r+| < R_a + R_b) are outside the modeled
    regime; the estimate still runs but the flag records it.
    """
    if mc.n_samples < 1000:
        raise ValueError("need at least 1e3 samples")
    if a.count != b.count:
        raise ValueError("equal constituent counts expected for the pair rate")
    r_plus = np.asarray(r_plus, dtype=float).reshape(3)
    r_minus = np.asarray(r_minus, dtype=float).reshape(3)
    payload = {"a": a, "b": b, "params": params, "r_plus": r_plus,
               "r_minus": r_minus}
    total, total_sq, n = run_chunked(_sphere_rate_chunk, payload, mc)
    mean = complex(total[0]) / n
    var_re = max(float(total_sq[0].real) / n - mean.real**2, 0.0)
    var_im = max(float(total_sq[0].imag) / n - mean.imag**2, 0.0)
    se_i = complex(math.sqrt(var_re / n), math.sqrt(var_im / n))

    sigma = a.resolution(params)
    damp = math.exp(-a.count * float(r_minus @ r_minus) / (16.0 * sigma**2))
    value = params.gamma * (1.0 - damp * mean)
    se = params.gamma * damp * complex(se_i.real, se_i.imag)
    if overlap_guard and float(np.linalg.norm(r_plus)) < (a.radius + b.radius):
        warnings.warn("spheres overlap: |r+| below the radius sum is outside "
                      "the rigid-pair regime", RuntimeWarning, stacklevel=2)
    return MCEstimate(value=value, std_error=se, n_samples=n, seed=mc.seed)


def _u_factor_scalar(x: float) -> float:
    """(sin x - x cos x) / x^3, series below x = 0.05."""
    if abs(x) < 0.05:
        x2 = x * x
        return 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0
    return (math.sin(x) - x * math.cos(x)) / (x * x * x)


def _shape_integrand(xi: float, alpha2: float, beta: float) -> float:
    u = _u_factor_scalar(xi)
    bx = beta * xi
    sinc = beta if xi == 0.0 else math.sin(bx) / xi
    return u * u * sinc * math.exp(-2.0 * alpha2 * xi * xi)


def R_factor(alpha: float, beta: float, abs_tol: float = 1e-8) -> float:
    """Shape factor of the smeared sphere-sphere potential.

    (18/pi) integral_0^inf (sin x - x cos x)^2 sin(beta x) / x^7
    exp(-2 alpha^2 x^2) dx with alpha the resolution and beta the
    center distance, both over the sphere radius.  Equals 1 for
    separated spheres when the damping is negligible and falls toward
    zero in the poor-resolution limit.  Integration runs on panels
    between the sine zeros with the Gaussian damping bounding the tail.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    alpha2 = alpha * alpha
    # tail cutoffs: Gaussian damping or the x^-4 envelope of the panel sums
    xi_gauss = math.sqrt(40.0 / (2.0 * alpha2))
    xi_poly = 260.0
    xi_max = min(xi_gauss, xi_poly)
    panel = math.pi / beta
    n_panels = max(1, int(math.ceil(xi_max / panel)))
    eps_panel = abs_tol / (4.0 * n_panels) * math.pi / 18.0
    total = 0.0
    err_total = 0.0
    lo = 0.0
    while lo < xi_max:
        hi = min(lo + panel, xi_max)
        val, err = quad(_shape_integrand, lo, hi, args=(alpha2, beta),
                        epsabs=eps_panel, epsrel=1e-11, limit=200)
        total += val
        err_total += abs(err)
        lo = hi
    # envelope bound on the discarded tail, |sin x - x cos x| <= 1 + x
    tail = math.exp(-2.0 * alpha2 * xi_max**2) * (
        1.0 / xi_max**4 / 4.0 + 2.0 / (5.0 * xi_max**5) + 1.0 / (6.0 * xi_max**6))
    achieved = (err_total + tail) * 18.0 / math.pi
    if achieved > abs_tol:
        raise NumericalError(
            f"shape-factor quadrature error {achieved:.2e} exceeds {abs_tol:.0e}")
    return 18.0 / math.pi * total


def smeared_pair_potential(r_plus: float, total_mass: float, radius: float,
                           sigma: float, params: CCGParams,
                           abs_tol: float = 1e-10) -> float:
    """G M^2 R(sigma/R, r+/R) / r+, the record-smeared sphere-sphere potential."""
    shape = R_factor(sigma / radius, r_plus / radius, abs_tol=abs_tol)
    return params.G * total_mass**2 * shape / r_plus


def I_first_order(r_plus, r_minus, total_mass: float, radius: float,
                  constituent_mass: float, params: CCGParams,
                  fd_step_rel: float = 1e-4, abs_tol: float = 1e-10) -> complex:
    """Small-phase factor 1 + i (r- . r+hat / hbar gamma) d/dr+ [G M^2 R / r+].

    The radial derivative uses central differences with one Richardson
    refinement; the constituent record resolution enters through the
    shape factor.  Vanishing imaginary part for r- perpendicular to r+.
    """
    r_plus = np.asarray(r_plus, dtype=float).reshape(3)
    r_minus = np.asarray(r_minus, dtype=float).reshape(3)
    rp = float(np.linalg.norm(r_plus))
    if rp <= 0:
        raise ValueError("need r+ > 0")
    sigma = derive_sigma_single(constituent_mass, params)

    def pot(r):
        return smeared_pair_potential(r, total_mass, radius, sigma, params,
                                      abs_tol=abs_tol)

    h = fd_step_rel * rp
    d1 = (pot(rp + h) - pot(rp - h)) / (2.0 * h)
    d2 = (pot(rp + 0.5 * h) - pot(rp - 0.5 * h)) / h
    deriv = (4.0 * d2 - d1) / 3.0
    radial = float(r_minus @ r_plus) / rp
    return 1.0 + 1j * radial * deriv / (params.hbar * params.gamma)


def _surface_correction(z: float, radius: float, sigma_s: float):
    """Relative potential correction near the surface and its z derivative.

    Exact reduction of the smeared-ball integral for z >= R once the
    far-side erf and Gaussian are saturated (z + R >> sigma_s):

        corr(z) = -[w^2 (z + 2R) + 6 s^2 z] E / 4R^3
                  + [3 z w - 2 w^2 + 4 s^2] T / 4R^3,

    with w = z - R, E = erfc(w / 2s), T = (2s/sqrt(pi)) exp(-w^2/4s^2).
    Negative definite at leading order: smearing can only weaken the
    well.  The derivative shares the same structure.
    """
    w = z - radius
    s = sigma_s
    x = w / (2.0 * s)
    e = float(erfc(x))
    t = (2.0 * s / math.sqrt(math.pi)) * math.exp(-x * x)
    r3 = 4.0 * radius**3
    corr = (-(w * w * (z + 2.0 * radius) + 6.0 * s * s * z) * e
            + (3.0 * z * w - 2.0 * w * w + 4.0 * s * s) * t) / r3
    dcorr = (-(2.0 * w * (z + 2.0 * radius) + w * w + 6.0 * s * s) * e
             + 3.0 * (2.0 * z - w) * t) / r3
    return corr, dcorr


def sphere_test_potential(z: float, total_mass: float, radius: float,
                          m: float, constituent_mass: float,
                          params: CCGParams) -> float:
    """Closed-form smeared potential of a large sphere on a test mass.

    (G m M / z) [1 + corr(z)] with the surface correction above, valid
    for z at or beyond the surface and radius >> sigma_s, where sigma_s
    is the test-constituent pair resolution.  The deviation from
    Newton is second order in sigma_s / R and Gaussian suppressed in
    (z - R) / sigma_s.
    """
    if z <= 0:
        raise ValueError("need z > 0")
    sigma_s = derive_sigma_pair(m, constituent_mass, params)
    corr, _ = _surface_correction(z, radius, sigma_s)
    return params.G * m * total_mass / z * (1.0 + corr)


def f_deviation(z: float, radius: float, sigma_s: float) -> float:
    """Surface-gravity deviation profile (z^3 + 3 R^2 z - 2 R^3)/4R^3 erfc((z-R)/2 sigma_s)."""
    if z <= 0 or radius <= 0 or sigma_s <= 0:
        raise ValueError("positive arguments required")
    poly = (z**3 + 3.0 * radius**2 * z - 2.0 * radius**3) / (4.0 * radius**3)
    return poly * float(erfc((z - radius) / (2.0 * sigma_s)))


def force_near_sphere(z: float, total_mass: float, radius: float, m: float,
                      constituent_mass: float, params: CCGParams) -> float:
    """Radial force d/dz of the corrected sphere potential.

    Negative values point toward the sphere; away from the surface this
    is the bare Newton value -G M m / z^2.
    """
    if z < radius:
        raise ValueError("defined at or beyond the surface, z >= R")
    sigma_s = derive_sigma_pair(m, constituent_mass, params)
    corr, dcorr = _surface_correction(z, radius, sigma_s)
    gmm = params.G * total_mass * m
    return gmm * (dcorr / z - (1.0 + corr) / z**2)
