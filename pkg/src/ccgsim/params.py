"""Model parameters, resolution scalings and nondimensionalization.

The model has two free parameters, a monitoring rate ``gamma`` and a
position resolution ``sigma0`` quoted at an arbitrary reference mass
``m0``.  A particle of mass ``m`` is resolved with

    sigma(m) = sqrt(m0 / m) * sigma0

and a pair (m_n, m_k) enters two-body quantities through the reduced
mass mu = m_n m_k / (m_n + m_k) via sigma_nk = sqrt(m0 / mu) * sigma0.

All other modules accept a :class:`CCGParams` and evaluate their
formulas verbatim in whatever consistent unit system the parameter
values define.  For production runs the CLI nondimensionalizes first,
see :meth:`CCGParams.internal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

G_SI = 6.674e-11
"""Newton constant, m^3 kg^-1 s^-2."""

HBAR_SI = 1.0546e-34
"""Reduced Planck constant, J s."""


def _require_positive(**values: float) -> None:
    for name, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class CCGParams:
    """Model constants.

    gamma:  monitoring rate [1/s]
    sigma0: reference resolution [m]
    m0:     reference mass [kg]
    G:      gravitational constant [m^3 kg^-1 s^-2]
    hbar:   reduced Planck constant [J s]
    """

    gamma: float
    sigma0: float
    m0: float
    G: float = G_SI
    hbar: float = HBAR_SI

    def __post_init__(self):
        _require_positive(gamma=self.gamma, sigma0=self.sigma0, m0=self.m0,
                          G=self.G, hbar=self.hbar)
        if not math.isfinite(self.chi) or self.chi <= 0:
            raise ValueError(f"derived coupling chi={self.chi} is not finite positive")

    @property
    def chi(self) -> float:
        """Dimensionless gravity strength G m0^2 / (hbar gamma sigma0).

        In internal units this is the momentum kick, in units of
        hbar/sigma0, between two reference masses at unit separation.
        """
        return self.G * self.m0**2 / (self.hbar * self.gamma * self.sigma0)

    @property
    def kappa(self) -> float:
        """Dimensionless action scale hbar / (m0 sigma0^2 gamma).

        Ratio of the quantum of action to the mechanical action scale of
        the internal unit system.  Gravity never enters through kappa;
        it only sets how dispersive the quantum dynamics are.
        """
        return self.hbar / (self.m0 * self.sigma0**2 * self.gamma)

    def sigma_single(self, m: float) -> float:
        """Resolution for one particle of mass m."""
        return derive_sigma_single(m, self)

    def sigma_pair(self, m_n: float, m_k: float) -> float:
        """Pair resolution for masses m_n, m_k."""
        return derive_sigma_pair(m_n, m_k, self)

    def internal(self) -> "CCGParams":
        """Equivalent parameters in internal units.

        Internal units measure mass in m0, length in sigma0 and time in
        1/gamma, so gamma = sigma0 = m0 = 1.  The remaining constants
        become hbar -> kappa and G -> chi * kappa; every formula keeps
        its shape and gravity enters only through chi.
        """
        return CCGParams(gamma=1.0, sigma0=1.0, m0=1.0,
                         G=self.chi * self.kappa, hbar=self.kappa)


def derive_sigma_single(m: float, params: CCGParams) -> float:
    """Measurement resolution sqrt(m0/m) sigma0 for a single mass."""
    if not (m > 0 and math.isfinite(m)):
        raise ValueError(f"mass must be positive and finite, got {m!r}")
    return math.sqrt(params.m0 / m) * params.sigma0


def derive_sigma_pair(m_n: float, m_k: float, params: CCGParams) -> float:
    """Pair resolution sqrt(m0/mu) sigma0, mu the reduced mass.

    Symmetric in its mass arguments.
    """
    if not (m_n > 0 and math.isfinite(m_n)):
        raise ValueError(f"mass must be positive and finite, got {m_n!r}")
    if not (m_k > 0 and math.isfinite(m_k)):
        raise ValueError(f"mass must be positive and finite, got {m_k!r}")
    mu = m_n * m_k / (m_n + m_k)
    return math.sqrt(params.m0 / mu) * params.sigma0


# Unit roles accepted by to_internal / from_internal.  Each maps to the
# exponents (a, b, c) of the scale m0^a sigma0^b gamma^c.  The system is
# deliberately closed over the three mechanical base scales so that a
# value computed by internal-unit formulas converts back exactly; the
# quantum scales hbar*gamma and hbar/sigma0 are exposed on UnitScales
# for reporting but are not conversion roles.
_MECH_ROLES = {
    "length": (0, 1, 0),
    "mass": (1, 0, 0),
    "time": (0, 0, -1),
    "rate": (0, 0, 1),
    "frequency": (0, 0, 1),
    "velocity": (0, 1, 1),
    "acceleration": (0, 1, 2),
    "momentum": (1, 1, 1),
    "force": (1, 1, 2),
    "energy": (1, 2, 2),
    "power": (1, 2, 3),
    "action": (1, 2, 1),
    "spring_constant": (1, 0, 2),
    "momentum_diffusion": (2, 2, 3),
    "gravitational_constant": (-1, 3, 2),
    "dimensionless": (0, 0, 0),
}


@dataclass(frozen=True)
class UnitScales:
    """Named scales of the internal unit system derived from CCGParams.

    length = sigma0, mass = m0, time = 1/gamma.  The decoherence energy
    quantum hbar*gamma and kick momentum hbar/sigma0 are exposed as the
    natural reporting scales; role-based conversions use the closed
    mechanical system m0^a sigma0^b gamma^c so that round trips through
    internal-unit formulas are exact.
    """

    length: float
    mass: float
    time: float
    energy_quantum: float
    momentum_quantum: float
    chi: float
    kappa: float
    params: CCGParams = field(repr=False)

    @classmethod
    def from_params(cls, params: CCGParams) -> "UnitScales":
        return cls(length=params.sigma0, mass=params.m0, time=1.0 / params.gamma,
                   energy_quantum=params.hbar * params.gamma,
                   momentum_quantum=params.hbar / params.sigma0,
                   chi=params.chi, kappa=params.kappa, params=params)

    def scale(self, role: str) -> float:
        """Numeric scale (in the params' own units) for a quantity role."""
        p = self.params
        if role in _MECH_ROLES:
            a, b, c = _MECH_ROLES[role]
            return p.m0**a * p.sigma0**b * p.gamma**c
        raise ValueError(f"unknown unit role {role!r}; known roles: "
                         f"{sorted(_MECH_ROLES)}")


def to_internal(params: CCGParams, value: float, role: str) -> float:
    """Convert a quantity with the given role to internal units."""
    return value / UnitScales.from_params(params).scale(role)


def from_internal(params: CCGParams, value: float, role: str) -> float:
    """Convert a quantity with the given role back from internal units."""
    return value * UnitScales.from_params(params).scale(role)
