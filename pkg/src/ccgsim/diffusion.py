"""Feedback-diffusion tensor of the momentum second moments.

The channel's random kicks add a positive semidefinite diffusion term
built from the dyadics q_n q_k / hbar^2 averaged over the measurement
noise.  The exact average is a 3N-dimensional Gaussian integral; here it
is estimated by Monte Carlo with deterministic chunked seeding, next to
the far-field closed form valid when no two masses are within a few
pair resolutions of each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .gravity import ParticleConfig, kick_vectors_batch
from .mc import MCEstimate, MCSettings, run_chunked
from .params import CCGParams

__all__ = ["DiffusionTensor", "diffusion_far", "diffusion_mc"]


@dataclass(frozen=True)
class DiffusionTensor:
    """N x N array of 3 x 3 blocks; block (n, k) couples particles n, k."""

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 4 or blocks.shape[0] != blocks.shape[1] \
                or blocks.shape[2:] != (3, 3):
            raise ValueError(f"blocks must have shape (N, N, 3, 3), got {blocks.shape}")
        blocks.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    def full(self) -> np.ndarray:
        """The (3N, 3N) matrix with particle-major ordering."""
        n = self.n
        return self.blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)

    def symmetry_defect(self) -> float:
        m = self.full()
        return float(np.max(np.abs(m - m.T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.full())[0])

    def is_psd(self, rtol: float = 1e-10) -> bool:
        m = self.full()
        evals = np.linalg.eigvalsh(m)
        scale = max(float(evals[-1]), 0.0)
        return bool(evals[0] >= -rtol * max(scale, 1e-300))


def diffusion_far(config: ParticleConfig, params: CCGParams) -> DiffusionTensor:
    """Far-field diffusion tensor from bare-Newton kicks at the positions.

    A_nk = q_n q_k^T / hbar^2 with q the Newtonian kick sums.  Valid for
    pairwise separations well beyond the pair resolutions; coincident
    positions are rejected because the bare kicks diverge there.
    """
    pos = config.positions
    n = config.n
    q = np.zeros((n, 3))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            vec = pos[i] - pos[j]
            r2 = float(vec @ vec)
            if r2 == 0.0:
                raise ValueError(
                    f"particles {i} and {j} coincide; far-field form is singular there")
            # Newtonian gradient of -G m_i m_j / r is +G m_i m_j vec / r^3
            q[i] -= params.G * config.masses[i] * config.masses[j] \
                * vec / (r2 ** 1.5) / params.gamma
    blocks = np.einsum("na,kb->nkab", q, q) / params.hbar**2
    return DiffusionTensor(blocks)


def _diffusion_chunk(rng: np.random.Generator, n_samples: int,
                     payload: dict[str, Any]) -> tuple[np.ndarray, np.ndarray]:
    config: ParticleConfig = payload["config"]
    params: CCGParams = payload["params"]
    sigmas = payload["sigmas"]
    n = config.n
    noise = rng.standard_normal((n_samples, n, 3)) * sigmas[None, :, None]
    z = config.positions[None] + noise
    q = kick_vectors_batch(z, config.masses, params) / params.hbar
    dyad = np.einsum("sna,skb->snkab", q, q)
    return dyad.sum(axis=0), (dyad * dyad).sum(axis=0)


def diffusion_mc(config: ParticleConfig, params: CCGParams,
                 mc: MCSettings) -> MCEstimate:
    """Monte Carlo estimate of the diffusion tensor at a configuration.

    Samples measurement records z_n ~ Normal(position_n, sigma_n^2 per
    axis), which is exactly the weight of the squared measurement
    kernel, and averages the regularized-kick dyadics q_n q_k / hbar^2.
    Returns per-entry standard errors.  Chunks are seeded independently
    from the master seed and reduced in index order, so the result does
    not depend on how chunks are scheduled.
    """
    if mc.n_samples < 2:
        raise ValueError("need at least 2 samples")
    payload = {"config": config, "params": params,
               "sigmas": config.sigma_singles(params)}
    total, total_sq, n_tot = run_chunked(_diffusion_chunk, payload, mc)
    mean = total / n_tot
    var = np.maximum(total_sq / n_tot - mean**2, 0.0)
    se = np.sqrt(var / n_tot)
    return MCEstimate(value=mean, std_error=se, n_samples=n_tot, seed=mc.seed)
