"""Discretized quantum states: wavefunctions and density matrices.

One-dimensional many-particle simulations embed the particles on the x
axis of the three-dimensional model: each simulated degree of freedom
is the x coordinate of one particle, while the transverse coordinates
stay classical anchors.  Measurement records are still drawn in full 3D
around those anchors, so the kicks seen by the simulated axis carry the
correct transverse noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridResolutionError, NumericalError

__all__ = ["GridAxis", "GridWavefunction", "GridDensityMatrix", "gaussian_packet"]


@dataclass(frozen=True)
class GridAxis:
    """Uniform spatial grid x_j = origin + j dx, j = 0..n-1."""

    n: int
    dx: float
    origin: float

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("grid needs at least 8 points")
        if self.dx <= 0:
            raise ValueError("dx must be positive")

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * math.pi * sfft.fftfreq(self.n, self.dx)

    @property
    def length(self) -> float:
        return self.n * self.dx

    @classmethod
    def centered(cls, n: int, dx: float, center: float = 0.0) -> "GridAxis":
        return cls(n=n, dx=dx, origin=center - 0.5 * (n - 1) * dx)


class GridWavefunction:
    """Complex amplitudes over a product of 1D axes.

    axes[i] simulates the x coordinate of particle axis_particle[i];
    anchors holds the classical 3-vector position of every particle and
    supplies the unsimulated components.  Norm is kept at 1 in the
    continuum convention sum |psi|^2 dV = 1.
    """

    def __init__(self, axes, psi, masses, anchors=None, axis_particle=None):
        self.axes = tuple(axes)
        self.psi = np.asarray(psi, dtype=complex)
        self.masses = np.atleast_1d(np.asarray(masses, dtype=float))
        n_particles = self.masses.shape[0]
        if axis_particle is None:
            axis_particle = tuple(range(len(self.axes)))
        self.axis_particle = tuple(axis_particle)
        if anchors is None:
            anchors = np.zeros((n_particles, 3))
        self.anchors = np.asarray(anchors, dtype=float).reshape(n_particles, 3)
        if self.psi.shape != tuple(ax.n for ax in self.axes):
            raise ValueError(f"psi shape {self.psi.shape} does not match axes")
        if len(self.axis_particle) != len(self.axes):
            raise ValueError("one particle index per axis required")
        if max(self.axis_particle) >= n_particles:
            raise ValueError("axis_particle index out of range")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def dv(self) -> float:
        out = 1.0
        for ax in self.axes:
            out *= ax.dx
        return out

    def axis_masses(self) -> np.ndarray:
        return self.masses[list(self.axis_particle)]

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.psi) ** 2)) * self.dv)

    def normalize(self) -> "GridWavefunction":
        n = self.norm()
        if n < 1e-300:
            raise NumericalError("wavefunction norm underflowed")
        self.psi = self.psi / n
        return self

    def copy(self) -> "GridWavefunction":
        return GridWavefunction(self.axes, self.psi.copy(), self.masses,
                                self.anchors, self.axis_particle)

    def probability(self) -> np.ndarray:
        return np.abs(self.psi) ** 2 * self.dv

    def boundary_defect(self) -> float:
        """Largest |psi| on the two outermost layers, relative to max |psi|."""
        a = np.abs(self.psi)
        peak = float(a.max())
        if peak == 0.0:
            return 0.0
        worst = 0.0
        for dim in range(self.ndim):
            sl = [slice(None)] * self.ndim
            for idx in (0, 1, -2, -1):
                sl[dim] = idx
                worst = max(worst, float(a[tuple(sl)].max()))
        return worst / peak

    def check_boundary(self, tol: float = 1e-8) -> None:
        d = self.boundary_defect()
        if d > tol:
            raise GridResolutionError(
                f"state reached the grid edge: boundary amplitude {d:.2e} of peak > {tol:.0e}")

    # -- observables -------------------------------------------------

    def _momentum_pmf(self):
        psik = sfft.fftn(self.psi)
        pmf = np.abs(psik) ** 2
        s = pmf.sum()
        if s <= 0:
            raise NumericalError("empty momentum distribution")
        return pmf / s

    def moments(self, hbar: float) -> dict:
        """Means and second moments of positions and momenta.

        Keys: x{a}, p{a}, x2_{a}, p2_{a}, xp_{a} per axis a, cross
        xx_{a}{b}, pp_{a}{b} for a < b, and ekin.
        """
        pmf = np.abs(self.psi) ** 2
        pmf = pmf / pmf.sum()
        kpmf = self._momentum_pmf()
        out = {}
        xs = [ax.points for ax in self.axes]
        ks = [ax.k for ax in self.axes]
        ax_range = range(self.ndim)
        masses = self.axis_masses()

        def axis_mean(w, vals, a):
            marg = w
            for other in reversed(ax_range):
                if other != a:
                    marg = marg.sum(axis=other)
            return float(marg @ vals)

        for a in ax_range:
            out[f"x{a}"] = axis_mean(pmf, xs[a], a)
            out[f"x2_{a}"] = axis_mean(pmf, xs[a] ** 2, a)
            out[f"p{a}"] = hbar * axis_mean(kpmf, ks[a], a)
            out[f"p2_{a}"] = hbar**2 * axis_mean(kpmf, ks[a] ** 2, a)
        for a in ax_range:
            for b in ax_range:
                if a < b:
                    out[f"xx_{a}{b}"] = float(np.sum(
                        pmf * _outer_on_axes(xs[a], xs[b], a, b, pmf.shape)))
                    out[f"pp_{a}{b}"] = hbar**2 * float(np.sum(
                        kpmf * _outer_on_axes(ks[a], ks[b], a, b, kpmf.shape)))
        # symmetrized position-momentum correlation per axis
        psik = sfft.fftn(self.psi)
        for a in ax_range:
            shape = [1] * self.ndim
            shape[a] = self.axes[a].n
            pk = hbar * ks[a].reshape(shape)
            ppsi = sfft.ifftn(psik * pk)
            val = np.vdot(self.psi, xs[a].reshape(shape) * ppsi) * self.dv
            out[f"xp_{a}"] = float(val.real)
        out["ekin"] = float(sum(out[f"p2_{a}"] / (2.0 * masses[a]) for a in ax_range))
        return out

    def sample_position_index(self, rng: np.random.Generator) -> tuple:
        """Draw one grid point from |psi|^2."""
        pmf = np.abs(self.psi) ** 2
        flat = pmf.ravel()
        cum = np.cumsum(flat)
        total = cum[-1]
        u = rng.random() * total
        idx = int(np.searchsorted(cum, u, side="right"))
        idx = min(idx, flat.size - 1)
        return np.unravel_index(idx, pmf.shape)

    def apply_mask(self, axis: int, center: float, sigma: float) -> None:
        """Multiply a Gaussian window exp(-(x-center)^2 / 4 sigma^2) on one axis."""
        ax = self.axes[axis]
        mask = np.exp(-((ax.points - center) ** 2) / (4.0 * sigma**2))
        shape = [1] * self.ndim
        shape[axis] = ax.n
        self.psi *= mask.reshape(shape)

    def apply_phase(self, axis: int, slope: float) -> None:
        """Multiply exp(i slope x) along one axis (a momentum displacement)."""
        ax = self.axes[axis]
        shape = [1] * self.ndim
        shape[axis] = ax.n
        self.psi *= np.exp(1j * slope * ax.points).reshape(shape)

    def scale(self, factor: float) -> None:
        self.psi *= factor


def _outer_on_axes(va, vb, a, b, shape):
    sa = [1] * len(shape)
    sa[a] = len(va)
    sb = [1] * len(shape)
    sb[b] = len(vb)
    return va.reshape(sa) * vb.reshape(sb)


def gaussian_packet(axes, centers, widths, momenta, masses, hbar,
                    anchors=None, axis_particle=None) -> GridWavefunction:
    """Product of minimum-uncertainty packets, one per axis.

    widths are position standard deviations; momenta are mean momenta.
    """
    axes = tuple(axes)
    psi = np.ones(tuple(ax.n for ax in axes), dtype=complex)
    for a, ax in enumerate(axes):
        x = ax.points
        comp = np.exp(-((x - centers[a]) ** 2) / (4.0 * widths[a] ** 2)
                      + 1j * momenta[a] * x / hbar)
        shape = [1] * len(axes)
        shape[a] = ax.n
        psi = psi * comp.reshape(shape)
    wf = GridWavefunction(axes, psi, masses, anchors, axis_particle)
    return wf.normalize()


class ProductWavefunction:
    """Tensor product of 1D factors, one per simulated degree of freedom.

    Collinear many-particle dynamics with per-axis potentials act as
    tensor products on each factor (masks, kick phases, kinetic and
    pinning terms all factorize; only the shared record values couple
    the factors), so a product initial state stays a product along
    every trajectory.  Exposes the GridWavefunction protocol needed by
    the trajectory engine at 1D cost per factor.
    """

    def __init__(self, factors, masses, anchors=None, axis_particle=None):
        self.factors = list(factors)
        for f in self.factors:
            if f.ndim != 1:
                raise ValueError("factors must be one-dimensional states")
        self.masses = np.atleast_1d(np.asarray(masses, dtype=float))
        n_particles = self.masses.shape[0]
        if axis_particle is None:
            axis_particle = tuple(range(len(self.factors)))
        self.axis_particle = tuple(axis_particle)
        if anchors is None:
            anchors = np.zeros((n_particles, 3))
        self.anchors = np.asarray(anchors, dtype=float).reshape(n_particles, 3)

    @property
    def axes(self):
        return tuple(f.axes[0] for f in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def axis_masses(self) -> np.ndarray:
        return self.masses[list(self.axis_particle)]

    def copy(self) -> "ProductWavefunction":
        return ProductWavefunction([f.copy() for f in self.factors], self.masses,
                                   self.anchors, self.axis_particle)

    def norm(self) -> float:
        out = 1.0
        for f in self.factors:
            out *= f.norm()
        return out

    def normalize(self) -> "ProductWavefunction":
        for f in self.factors:
            f.normalize()
        return self

    def boundary_defect(self) -> float:
        return max(f.boundary_defect() for f in self.factors)

    def check_boundary(self, tol: float = 1e-8) -> None:
        for f in self.factors:
            f.check_boundary(tol)

    def sample_position_index(self, rng: np.random.Generator) -> tuple:
        return tuple(f.sample_position_index(rng)[0] for f in self.factors)

    def apply_mask(self, axis: int, center: float, sigma: float) -> None:
        self.factors[axis].apply_mask(0, center, sigma)

    def apply_phase(self, axis: int, slope: float) -> None:
        self.factors[axis].apply_phase(0, slope)

    def scale(self, factor: float) -> None:
        self.factors[0].scale(factor)

    def moments(self, hbar: float) -> dict:
        out = {}
        per_factor = [f.moments(hbar) for f in self.factors]
        masses = self.axis_masses()
        for a, m in enumerate(per_factor):
            out[f"x{a}"] = m["x0"]
            out[f"p{a}"] = m["p0"]
            out[f"x2_{a}"] = m["x2_0"]
            out[f"p2_{a}"] = m["p2_0"]
            out[f"xp_{a}"] = m["xp_0"]
        for a in range(self.ndim):
            for b in range(a + 1, self.ndim):
                out[f"xx_{a}{b}"] = out[f"x{a}"] * out[f"x{b}"]
                out[f"pp_{a}{b}"] = out[f"p{a}"] * out[f"p{b}"]
        out["ekin"] = float(sum(out[f"p2_{a}"] / (2.0 * masses[a])
                                for a in range(self.ndim)))
        return out

    def to_full(self) -> GridWavefunction:
        psi = self.factors[0].psi
        for f in self.factors[1:]:
            psi = np.multiply.outer(psi, f.psi)
        return GridWavefunction(self.axes, psi, self.masses, self.anchors,
                                self.axis_particle)


class GridDensityMatrix:
    """Position-representation density matrix for one or two 1D particles.

    One particle: rho[i, j] = <x_i| rho |x_j>.  Two particles:
    rho[i1, i2, j1, j2] = <x1_i1 x2_i2| rho |x1_j1 x2_j2>.
    """

    def __init__(self, axes, rho, masses):
        if isinstance(axes, GridAxis):
            axes = (axes,)
        self.axes = tuple(axes)
        self.rho = np.asarray(rho, dtype=complex)
        self.masses = np.atleast_1d(np.asarray(masses, dtype=float))
        n_p = len(self.axes)
        if n_p not in (1, 2):
            raise ValueError("supports one or two 1D particles")
        if self.masses.shape[0] != n_p:
            raise ValueError("one mass per particle required")
        expect = tuple(ax.n for ax in self.axes) * 2
        if n_p == 2:
            expect = (self.axes[0].n, self.axes[1].n, self.axes[0].n, self.axes[1].n)
        if self.rho.shape != expect:
            raise ValueError(f"rho shape {self.rho.shape}, expected {expect}")

    @property
    def n_particles(self) -> int:
        return len(self.axes)

    @property
    def dv(self) -> float:
        out = 1.0
        for ax in self.axes:
            out *= ax.dx
        return out

    def matrix(self) -> np.ndarray:
        """Flattened (D, D) matrix over the joint grid."""
        if self.n_particles == 1:
            return self.rho
        m = self.axes[0].n * self.axes[1].n
        return self.rho.reshape(m, m)

    def trace(self) -> float:
        return float(np.trace(self.matrix()).real) * self.dv

    def hermiticity_defect(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m - m.conj().T)))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue in the continuum normalization."""
        evals = np.linalg.eigvalsh(self.matrix())
        return float(evals[0]) * self.dv

    def validate(self, trace_tol=1e-10, herm_tol=1e-12, eig_tol=1e-8,
                 deep=False) -> None:
        if abs(self.trace() - 1.0) > trace_tol:
            raise NumericalError(f"trace {self.trace()} deviates from 1")
        scale = float(np.max(np.abs(self.rho)))
        if self.hermiticity_defect() > herm_tol * max(scale, 1e-300):
            raise NumericalError("density matrix lost hermiticity")
        if deep and self.min_eigenvalue() < -eig_tol:
            raise NumericalError(
                f"density matrix lost positivity: min eigenvalue {self.min_eigenvalue():.2e}")

    def copy(self) -> "GridDensityMatrix":
        return GridDensityMatrix(self.axes, self.rho.copy(), self.masses)

    @classmethod
    def from_wavefunction(cls, wf: GridWavefunction) -> "GridDensityMatrix":
        if wf.ndim == 1:
            rho = np.outer(wf.psi, wf.psi.conj()) * 1.0
            return cls(wf.axes, rho, wf.masses)
        if wf.ndim == 2:
            rho = np.einsum("ab,cd->abcd", wf.psi, wf.psi.conj())
            return cls(wf.axes, rho, wf.masses)
        raise ValueError("only one or two particles supported")
