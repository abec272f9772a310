"""Configuration-level gravity: regularized potentials, kicks, mean forces.

Pair potentials are Newtonian potentials sourced by a Gaussian mass
density of width sigma_nk,

    phi(r) = -G m_n m_k erf(r / (sqrt(2) sigma_nk)) / r,

finite at r = 0.  Feedback kicks use the gradient of phi at the measured
positions.  The ensemble-averaged force smears phi once more over the
measurement noise, which adds the variances and turns the erf argument
into r / (2 sigma_nk); that closed form is implemented next to a direct
Gauss-Hermite quadrature oracle of the defining convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import NumericalError
from .params import CCGParams, derive_sigma_pair, derive_sigma_single

__all__ = [
    "ParticleConfig",
    "phi_reg",
    "pair_force_scale",
    "pair_coupling_matrices",
    "kick_vector",
    "kick_vectors",
    "kick_vectors_batch",
    "mean_force",
    "mean_forces",
    "smeared_force_oracle",
    "force_jacobian",
    "force_jacobian_asymmetry",
    "moment_rate_contributions",
]


@dataclass(frozen=True)
class ParticleConfig:
    """Masses and classical positions of N point constituents.

    positions has shape (N, 3).  Depending on the operation the entries
    are read as actual positions or as measurement outcomes.
    """

    masses: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim == 1:
            positions = positions.reshape(1, -1)
        if positions.shape != (masses.shape[0], 3):
            raise ValueError(
                f"positions must have shape (N, 3) matching {masses.shape[0]} masses, "
                f"got {positions.shape}")
        if masses.size < 1:
            raise ValueError("need at least one particle")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise ValueError("all masses must be positive and finite")
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        masses.flags.writeable = False
        positions.flags.writeable = False
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "positions", positions)

    @property
    def n(self) -> int:
        return self.masses.shape[0]

    def sigma_singles(self, params: CCGParams) -> np.ndarray:
        """Per-particle resolutions sigma_n, shape (N,)."""
        return np.array([derive_sigma_single(m, params) for m in self.masses])

    def sigma_pairs(self, params: CCGParams) -> np.ndarray:
        """Pair resolutions sigma_nk, shape (N, N); diagonal unused."""
        n = self.n
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    out[i, j] = derive_sigma_pair(self.masses[i], self.masses[j], params)
        return out


_SQRT_PI = math.sqrt(math.pi)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _erf_over_x(x):
    """erf(x)/x, series below x = 1e-6 to avoid 0/0 at x = 0."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-6
    safe = np.where(small, 1.0, x)
    out = erf(safe) / safe
    series = _TWO_OVER_SQRT_PI * (1.0 - x * x / 3.0)
    return np.where(small, series, out)


def _g_shield(x):
    """erf(x) - (2/sqrt(pi)) x exp(-x^2), the force suppression factor.

    Equals (4/sqrt(pi)) * integral_0^x t^2 exp(-t^2) dt; rises from 0 at
    x = 0 to 1 in the far field.  The direct expression cancels badly
    for small x, so a series is used below x = 0.2.
    """
    x = np.asarray(x, dtype=float)
    small = x < 0.2
    safe_x = np.where(small, 1.0, x)
    direct = erf(safe_x) - _TWO_OVER_SQRT_PI * safe_x * np.exp(-safe_x * safe_x)
    # (4/sqrt(pi)) sum_k (-1)^k x^(2k+3) / (k! (2k+3))
    x2 = x * x
    term = x * x2
    acc = term / 3.0
    fact = 1.0
    for k in range(1, 10):
        fact *= k
        term = term * x2
        acc = acc + ((-1) ** k) * term / (fact * (2 * k + 3))
    series = (4.0 / _SQRT_PI) * acc
    return np.where(small, series, direct)


def _g_shield_over_x3(x):
    """g_shield(x) / x^3, finite (4/(3 sqrt(pi))) at x = 0."""
    x = np.asarray(x, dtype=float)
    small = x < 0.2
    safe_x = np.where(small, 1.0, x)
    direct = _g_shield(safe_x) / safe_x**3
    x2 = x * x
    term = np.ones_like(x)
    acc = term / 3.0
    fact = 1.0
    for k in range(1, 10):
        fact *= k
        term = term * x2
        acc = acc + ((-1) ** k) * term / (fact * (2 * k + 3))
    series = (4.0 / _SQRT_PI) * acc
    return np.where(small, series, direct)


def phi_reg(r, m_n: float, m_k: float, params: CCGParams):
    """Regularized pair potential -G m_n m_k erf(r / sqrt(2) sigma_nk) / r.

    Finite at r = 0, strictly increasing in r, Newtonian for
    r >> sigma_nk.  Accepts scalar or array r >= 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("separation r must be >= 0")
    sigma = derive_sigma_pair(m_n, m_k, params)
    x = r / (math.sqrt(2.0) * sigma)
    val = -params.G * m_n * m_k / (math.sqrt(2.0) * sigma) * _erf_over_x(x)
    if np.isscalar(r) or val.ndim == 0:
        return float(val)
    return val


def pair_force_scale(r, m_n: float, m_k: float, sigma_eff, G: float):
    """Scalar s(r) with dphi/dr = -s(r) * r for the erf-regularized pair.

    sigma_eff is the Gaussian source width of the effective potential:
    sigma_nk for kick-level gradients, sqrt(2) sigma_nk for the
    noise-averaged mean force.  The attractive force on particle n from
    k is then  F = -s(r) * (r_n - r_k), finite at r = 0.
    """
    r = np.asarray(r, dtype=float)
    x = r / (math.sqrt(2.0) * sigma_eff)
    denom3 = (math.sqrt(2.0) * sigma_eff) ** 3
    return G * m_n * m_k * _g_shield_over_x3(x) / denom3


def pair_coupling_matrices(masses: np.ndarray, params: CCGParams):
    """(G m_i m_j, sigma_ij) matrices with unit diagonal on sigma.

    Shared by the batch kick evaluation and the two-particle channel
    kernels; the diagonal entries are never used.
    """
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    gmm = params.G * np.outer(masses, masses)
    np.fill_diagonal(gmm, 0.0)
    mu = np.outer(masses, masses) / (masses[:, None] + masses[None, :])
    sig = np.sqrt(params.m0 / mu) * params.sigma0
    np.fill_diagonal(sig, 1.0)
    return gmm, sig


def kick_vectors_batch(records: np.ndarray, masses: np.ndarray,
                       params: CCGParams) -> np.ndarray:
    """Kick vectors for a batch of outcome sets, shape (S, N, 3) -> (S, N, 3)."""
    records = np.asarray(records, dtype=float)
    squeeze = records.ndim == 2
    if squeeze:
        records = records[None]
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    n = masses.shape[0]
    if records.shape[1:] != (n, 3):
        raise ValueError("records must have shape (S, N, 3) matching masses")
    gmm, sig = pair_coupling_matrices(masses, params)
    vec = records[:, :, None, :] - records[:, None, :, :]
    r = np.sqrt(np.einsum("snkc,snkc->snk", vec, vec))
    x = r / (math.sqrt(2.0) * sig[None])
    s = gmm[None] * _g_shield_over_x3(x) / (math.sqrt(2.0) * sig[None]) ** 3
    q = -np.einsum("snk,snkc->snc", s, vec) / params.gamma
    return q[0] if squeeze else q


def kick_vectors(record: np.ndarray, masses: np.ndarray, params: CCGParams) -> np.ndarray:
    """Momentum displacements q_n for a measurement record, shape (N, 3).

    q_n = -(1/gamma) sum_{k != n} grad phi_nk(|z_n - z_k|).  Uses the
    regularized potential throughout, so coincident outcomes are fine.
    The kicks sum to zero: the channel exerts no net force on the
    center of mass.
    """
    record = np.asarray(record, dtype=float).reshape(-1, 3)
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    if record.shape[0] != masses.shape[0]:
        raise ValueError("record and masses disagree on particle count")
    return kick_vectors_batch(record, masses, params)


def kick_vector(record: np.ndarray, masses: np.ndarray, n: int, params: CCGParams) -> np.ndarray:
    """Kick on particle n only; see kick_vectors."""
    qs = kick_vectors(record, masses, params)
    if not 0 <= n < qs.shape[0]:
        raise IndexError(f"particle index {n} out of range")
    return qs[n]


def mean_forces(config: ParticleConfig, params: CCGParams) -> np.ndarray:
    """Noise-averaged forces on all particles, shape (N, 3).

    Closed form: gradient of sum_k G m_n m_k erf(r_nk / 2 sigma_nk) / r_nk.
    Finite everywhere including coincident points; exact action-reaction
    pairs, so rows sum to zero.
    """
    n = config.n
    out = np.zeros((n, 3))
    for i in range(n):
        for j in range(i + 1, n):
            sigma = derive_sigma_pair(config.masses[i], config.masses[j], params)
            vec = config.positions[i] - config.positions[j]
            r = math.sqrt(float(vec @ vec))
            s = pair_force_scale(r, config.masses[i], config.masses[j],
                                 math.sqrt(2.0) * sigma, params.G)
            out[i] -= float(s) * vec
            out[j] += float(s) * vec
    return out


def mean_force(config: ParticleConfig, n: int, params: CCGParams) -> np.ndarray:
    """Mean force on particle n; see mean_forces."""
    forces = mean_forces(config, params)
    if not 0 <= n < forces.shape[0]:
        raise IndexError(f"particle index {n} out of range")
    return forces[n]


def _gauss_hermite_nodes(order: int):
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return nodes, weights / math.sqrt(math.pi)


def _smeared_pair_force(vec: np.ndarray, m_n: float, m_k: float, sigma: float,
                        params: CCGParams, order: int) -> np.ndarray:
    """Quadrature of the Gaussian-smeared kick gradient for one pair.

    Averages grad phi(|vec - z|) over z ~ Normal(0, sigma^2 I) with a
    tensorized Gauss-Hermite rule and returns minus that average (the
    attractive force contribution on particle n).
    """
    t, w = _gauss_hermite_nodes(order)
    zx, zy, zz = np.meshgrid(t, t, t, indexing="ij")
    wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    z = math.sqrt(2.0) * sigma * np.stack([zx.ravel(), zy.ravel(), zz.ravel()], axis=1)
    u = vec[None, :] - z
    r = np.linalg.norm(u, axis=1)
    s = pair_force_scale(r, m_n, m_k, sigma, params.G)
    grad = (s[:, None] * u)  # grad phi wrt vec
    return -np.einsum("s,sc->c", wt, grad)


def smeared_force_oracle(config: ParticleConfig, n: int, params: CCGParams,
                         order: int = 40, tol: float = 1e-8) -> np.ndarray:
    """Direct quadrature of the noise-averaged force on particle n.

    Independent oracle for mean_force: evaluates the defining Gaussian
    convolution of the regularized pair gradients with a tensorized
    Gauss-Hermite rule per pair.  The estimate is recomputed at a higher
    order; if the two disagree beyond tol relative, a NumericalError is
    raised rather than silently returning.
    """
    if not 0 <= n < config.n:
        raise IndexError(f"particle index {n} out of range")
    total = np.zeros(3)
    total_hi = np.zeros(3)
    char = 0.0
    for k in range(config.n):
        if k == n:
            continue
        sigma = derive_sigma_pair(config.masses[n], config.masses[k], params)
        vec = config.positions[n] - config.positions[k]
        total += _smeared_pair_force(vec, config.masses[n], config.masses[k],
                                     sigma, params, order)
        total_hi += _smeared_pair_force(vec, config.masses[n], config.masses[k],
                                        sigma, params, order + 12)
        char = max(char, params.G * config.masses[n] * config.masses[k]
                   / (2.0 * sigma) ** 2)
    # relative to the force magnitude, with the near-coincidence force
    # scale as a floor so that vanishing symmetric sums stay convergent
    scale = max(float(np.max(np.abs(total_hi))), char, 1e-300)
    err = float(np.max(np.abs(total - total_hi))) / scale
    if err > tol:
        raise NumericalError(
            f"smeared-force quadrature did not converge: estimated error {err:.2e} > {tol:.0e}")
    return total_hi


def force_jacobian(config: ParticleConfig, params: CCGParams,
                   fd_step: float = 1e-6) -> np.ndarray:
    """(3N, 3N) Jacobian d F_{n a} / d x_{k b} by central differences.

    fd_step is relative to the smallest pair resolution, keeping the
    stencil well inside the smooth core at every separation.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    sigmas = [derive_sigma_pair(config.masses[i], config.masses[j], params)
              for i in range(config.n) for j in range(i + 1, config.n)]
    scale = min(sigmas) if sigmas else params.sigma0
    h = fd_step * scale
    n = config.n
    jac = np.zeros((3 * n, 3 * n))
    for k in range(n):
        for b in range(3):
            for sgn in (+1.0, -1.0):
                pos = config.positions.copy()
                pos[k, b] += sgn * h
                f = mean_forces(ParticleConfig(config.masses, pos), params)
                jac[:, 3 * k + b] += sgn * f.reshape(-1) / (2.0 * h)
    return jac


def force_jacobian_asymmetry(config: ParticleConfig, params: CCGParams,
                             fd_step: float = 1e-6) -> float:
    """Max |dF_na/dx_kb - dF_kb/dx_na| over the finite-difference Jacobian.

    The mean force is the gradient of a single pair-sum potential, so
    the exact Jacobian is symmetric; the return value measures only
    finite-difference noise.
    """
    jac = force_jacobian(config, params, fd_step)
    return float(np.max(np.abs(jac - jac.T)))


def moment_rate_contributions(config: ParticleConfig, params: CCGParams,
                              diffusion: str = "far", mc=None):
    """Measurement and feedback contributions to momentum second moments.

    Returns (backaction, feedback): backaction[n] = hbar^2 gamma / 4 sigma_n^2
    per Cartesian axis, and feedback the hbar^2 gamma A_nk tensor with
    A from the far-field closed form ("far") or a Monte Carlo estimate
    ("mc", requires an MCSettings via mc).  The anticommutator drift
    term lives with the dynamical propagators, not here.
    """
    from .diffusion import diffusion_far, diffusion_mc  # local import, avoids cycle

    sig = config.sigma_singles(params)
    backaction = params.hbar**2 * params.gamma / (4.0 * sig**2)
    if config.n == 1:
        feedback = np.zeros((1, 1, 3, 3))
    elif diffusion == "far":
        feedback = diffusion_far(config, params).blocks
    elif diffusion == "mc":
        if mc is None:
            raise ValueError("diffusion='mc' needs mc settings")
        feedback = diffusion_mc(config, params, mc).value
    else:
        raise ValueError(f"unknown diffusion mode {diffusion!r}")
    return backaction, params.hbar**2 * params.gamma * feedback
