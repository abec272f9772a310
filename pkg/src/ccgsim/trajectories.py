"""Stochastic trajectory unraveling of the measurement-feedback channel.

Events arrive in a Poisson stream at the monitoring rate.  Each event
draws a full 3D record for every particle (grid axes from the state,
transverse components around the classical anchors), applies the
Gaussian masks on the simulated axes and the kick phases computed from
the complete record, and renormalizes.  Between events the state
evolves unitarily by spectral split stepping.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import GridResolutionError, NumericalError, RecordInTailError
from .gravity import kick_vectors
from .grids import GridWavefunction, ProductWavefunction
from .mc import rng_for
from .params import CCGParams, derive_sigma_single

__all__ = [
    "HarmonicPinning",
    "sample_record",
    "jump_event",
    "evolve_trajectory",
    "TrajectoryResult",
    "TrajectoryEnsemble",
    "run_ensemble",
]

MAX_PHASE_PER_STEP = 0.5
"""Largest tolerated kick phase advance per grid spacing, radians."""


@dataclass(frozen=True)
class HarmonicPinning:
    """Independent harmonic traps, one per simulated axis."""

    stiffness: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.stiffness, dtype=float))
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        if k.shape != c.shape:
            raise ValueError("stiffness and centers must match")
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "centers", c)

    def energy(self, meshes) -> np.ndarray:
        out = 0.0
        for a, x in enumerate(meshes):
            out = out + 0.5 * self.stiffness[a] * (x - self.centers[a]) ** 2
        return out


def _potential_array(psi: GridWavefunction, potential) -> Optional[np.ndarray]:
    if potential is None:
        return None
    shape = [1] * psi.ndim
    meshes = []
    for a, ax in enumerate(psi.axes):
        s = list(shape)
        s[a] = ax.n
        meshes.append(ax.points.reshape(s))
    if isinstance(potential, HarmonicPinning):
        return np.broadcast_to(potential.energy(meshes),
                               tuple(ax.n for ax in psi.axes)).copy()
    if callable(potential):
        return np.broadcast_to(potential(*meshes),
                               tuple(ax.n for ax in psi.axes)).copy()
    arr = np.asarray(potential, dtype=float)
    if arr.shape != tuple(ax.n for ax in psi.axes):
        raise ValueError("potential array shape does not match the grid")
    return arr


def sample_record(psi, params: CCGParams,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw one measurement record, shape (N, 3).

    The joint grid distribution |psi|^2 supplies the simulated
    components, classical anchors the rest; every component then gets
    independent Gaussian noise with that particle's resolution.  Draw
    order is fixed (grid sample, axis noise, anchor noise) so a seeded
    generator reproduces the record stream exactly.
    """
    idx = psi.sample_position_index(rng)
    n_particles = psi.masses.shape[0]
    record = psi.anchors.copy()
    simulated = set()
    for a, p in enumerate(psi.axis_particle):
        record[p, 0] = psi.axes[a].points[idx[a]]
        simulated.add((p, 0))
    sigmas = np.array([derive_sigma_single(m, params) for m in psi.masses])
    for a, p in enumerate(psi.axis_particle):
        record[p, 0] += sigmas[p] * rng.standard_normal()
    for p in range(n_particles):
        for c in range(3):
            if (p, c) not in simulated:
                record[p, c] += sigmas[p] * rng.standard_normal()
    return record


def jump_event(psi, record: np.ndarray, params: CCGParams):
    """Apply one measurement-feedback event for the given record.

    Masks the simulated axes around the record, multiplies the kick
    phases, renormalizes.  A record so deep in the tail that the masked
    state underflows raises RecordInTailError: the caller should draw a
    fresh record.  Works on full tensor states and on product states.
    """
    record = np.asarray(record, dtype=float).reshape(psi.masses.shape[0], 3)
    out = psi.copy()
    sigmas = np.array([derive_sigma_single(m, params) for m in psi.masses])
    for a in range(out.ndim):
        p = psi.axis_particle[a]
        out.apply_mask(a, record[p, 0], sigmas[p])
    nrm = out.norm()
    if nrm < 1e-12:
        raise RecordInTailError(f"masked state norm {nrm:.2e}")
    q = kick_vectors(record, psi.masses, params)
    for a, ax in enumerate(psi.axes):
        p = psi.axis_particle[a]
        qx = q[p, 0]
        if abs(qx) * ax.dx / params.hbar > MAX_PHASE_PER_STEP:
            raise GridResolutionError(
                f"kick phase {abs(qx) * ax.dx / params.hbar:.2f} rad per grid step "
                f"on axis {a}; refine the grid or weaken the coupling")
        out.apply_phase(a, qx / params.hbar)
    return out.normalize()


class _SplitStepper:
    """Spectral split-step evolution with cached phase factors."""

    def __init__(self, psi: GridWavefunction, params: CCGParams, potential):
        self.params = params
        self.axes = psi.axes
        self.ndim = psi.ndim
        masses = psi.axis_masses()
        shape = [1] * self.ndim
        self.k2_over_m = []
        for a, ax in enumerate(self.axes):
            s = list(shape)
            s[a] = ax.n
            self.k2_over_m.append((ax.k ** 2 / masses[a]).reshape(s))
        self.v = _potential_array(psi, potential)
        self._cache: dict = {}

    def _factors(self, dt: float):
        hit = self._cache.get(dt)
        if hit is not None:
            return hit
        hbar = self.params.hbar
        kin = 0.0
        for term in self.k2_over_m:
            kin = kin + term
        half_kin = np.exp(-0.25j * hbar * dt * kin)
        full_kin = half_kin * half_kin
        pot = None if self.v is None else np.exp(-1j * dt * self.v / hbar)
        if len(self._cache) > 32:
            self._cache.clear()
        self._cache[dt] = (half_kin, full_kin, pot)
        return self._cache[dt]

    def advance(self, psi: np.ndarray, duration: float, dt: float) -> np.ndarray:
        """Evolve by `duration` using Strang steps of at most dt."""
        if duration <= 0:
            return psi
        if self.v is None:
            _, full, _ = self._factors(duration)
            return sfft.ifftn(sfft.fftn(psi) * full)
        n_steps = max(1, int(math.ceil(duration / dt - 1e-12)))
        h = duration / n_steps
        half, full, pot = self._factors(h)
        psik = sfft.fftn(psi) * half
        for i in range(n_steps):
            psi = sfft.ifftn(psik) * pot
            psik = sfft.fftn(psi)
            psik = psik * (full if i + 1 < n_steps else half)
        return sfft.ifftn(psik)


class _ProductStepper:
    """Per-factor split stepping for product states and separable potentials."""

    def __init__(self, psi: ProductWavefunction, params: CCGParams, potential):
        self.steppers = []
        for a, f in enumerate(psi.factors):
            if potential is None:
                pot = None
            elif isinstance(potential, HarmonicPinning):
                pot = HarmonicPinning([potential.stiffness[a]],
                                      [potential.centers[a]])
            else:
                raise ValueError(
                    "product states support only separable potentials")
            self.steppers.append(_SplitStepper(f, params, pot))

    def advance_state(self, psi: ProductWavefunction, duration: float, dt: float):
        for f, st in zip(psi.factors, self.steppers):
            f.psi = st.advance(f.psi, duration, dt)


class _TensorStepper(_SplitStepper):
    def advance_state(self, psi: GridWavefunction, duration: float, dt: float):
        psi.psi = self.advance(psi.psi, duration, dt)


@dataclass
class TrajectoryResult:
    times: np.ndarray
    observables: dict
    n_jumps: int
    n_resampled: int
    final_state: object


def evolve_trajectory(psi0, duration: float, dt: float,
                      params: CCGParams, rng: np.random.Generator,
                      potential=None, output_times=None,
                      boundary_tol: float = 1e-8,
                      norm_drift_tol: float = 1e-6) -> TrajectoryResult:
    """One stochastic trajectory with exactly timed Poisson events.

    Event times come from exponential inter-arrival sampling, so there
    is no first-order timestep bias in the event statistics.  dt only
    bounds the Strang splitting step of the unitary segments.
    """
    if dt <= 0 or duration < 0:
        raise ValueError("need dt > 0 and duration >= 0")
    if dt > 0.25 / params.gamma:
        raise ValueError("dt must stay well below the mean event spacing")
    for a, ax in enumerate(psi0.axes):
        sig = derive_sigma_single(psi0.masses[psi0.axis_particle[a]], params)
        if ax.dx > 0.5 * sig:
            raise GridResolutionError(
                f"axis {a} spacing {ax.dx} too coarse for resolution {sig}")
    if output_times is None:
        output_times = np.linspace(0.0, duration, 9)
    output_times = np.asarray(output_times, dtype=float)

    psi = psi0.copy().normalize()
    if isinstance(psi, ProductWavefunction):
        stepper = _ProductStepper(psi, params, potential)
    else:
        stepper = _TensorStepper(psi, params, potential)
    t = 0.0
    next_jump = rng.exponential(1.0 / params.gamma)
    n_jumps = 0
    n_resampled = 0
    obs: dict = {}

    def record_point(when):
        moments = psi.moments(params.hbar)
        moments["norm_err"] = abs(psi.norm() - 1.0)
        for key, val in moments.items():
            obs.setdefault(key, []).append(val)
        psi.check_boundary(boundary_tol)

    for target in output_times:
        while True:
            t_next = min(target, next_jump if next_jump < duration else duration)
            if t_next >= target:
                stepper.advance_state(psi, target - t, dt)
                t = target
                break
            stepper.advance_state(psi, t_next - t, dt)
            t = t_next
            nrm = psi.norm()
            if abs(nrm - 1.0) > norm_drift_tol:
                raise NumericalError(f"norm drifted to {nrm} at t={t}")
            for _ in range(64):
                try:
                    psi = jump_event(psi, sample_record(psi, params, rng), params)
                    break
                except RecordInTailError:
                    n_resampled += 1
            else:
                raise NumericalError("could not draw a usable record in 64 tries")
            n_jumps += 1
            next_jump = t + rng.exponential(1.0 / params.gamma)
        record_point(target)

    observables = {k: np.asarray(v) for k, v in obs.items()}
    return TrajectoryResult(times=output_times, observables=observables,
                            n_jumps=n_jumps, n_resampled=n_resampled,
                            final_state=psi)


@dataclass
class TrajectoryEnsemble:
    """Per-trajectory observable time series on a shared time grid."""

    times: np.ndarray
    observables: dict
    master_seed: int
    n_trajectories: int

    def mean(self, key: str):
        """Ensemble mean and standard error of an observable."""
        data = self.observables[key]
        m = data.mean(axis=0)
        se = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
        return m, se


def run_ensemble(psi0, duration: float, dt: float,
                 params: CCGParams, n_trajectories: int, master_seed: int,
                 potential=None, output_times=None, threads: int = 1,
                 initial_factory: Optional[Callable[[int], object]] = None
                 ) -> TrajectoryEnsemble:
    """Run independent seeded trajectories and stack their observables.

    Trajectory i uses the counter-based stream (master_seed, i), and
    results are assembled in trajectory order, so the ensemble is
    reproducible bit for bit at any thread count.
    """
    if n_trajectories < 2:
        raise ValueError("an ensemble needs at least 2 trajectories")

    def job(i: int):
        rng = rng_for(master_seed, i)
        start = psi0 if initial_factory is None else initial_factory(i)
        res = evolve_trajectory(start, duration, dt, params, rng,
                                potential=potential, output_times=output_times)
        return res.observables

    if threads == 1:
        results = [job(i) for i in range(n_trajectories)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n_trajectories)))

    keys = results[0].keys()
    stacked = {k: np.stack([r[k] for r in results], axis=0) for k in keys}
    times = output_times if output_times is not None \
        else np.linspace(0.0, duration, 9)
    return TrajectoryEnsemble(times=np.asarray(times, dtype=float),
                              observables=stacked, master_seed=master_seed,
                              n_trajectories=n_trajectories)
