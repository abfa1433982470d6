"""Helmholtz fundamental solution, its derivatives, and dipole source fields.

All formulas are closed-form; the Hessian is coded from the explicit radial
derivatives of exp(ikr)/(4 pi r) rather than nested differences.  Points may
be passed as (..., 3) arrays; kernels broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import DomainDescriptor, exterior_offset

MIN_DISTANCE = 1e-14


class KernelError(ValueError):
    pass


def validate_wavenumber(k: complex) -> complex:
    """Wavenumbers must sit in the closed first quadrant (Re k, Im k >= 0)."""
    k = complex(k)
    if k.real < 0 or k.imag < 0:
        raise KernelError(f"wavenumber {k} outside the first quadrant")
    return k


def _separation(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r < MIN_DISTANCE):
        raise KernelError("evaluation at (nearly) coincident points")
    return d, r


def phi(k: complex, x, y):
    """Fundamental solution exp(ik|x-y|) / (4 pi |x-y|)."""
    k = validate_wavenumber(k)
    _, r = _separation(x, y)
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


def grad_phi(k: complex, x, y):
    """Gradient in x: (ik - 1/r) * phi * (x-y)/r."""
    k = validate_wavenumber(k)
    d, r = _separation(x, y)
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    fac = (1j * k - 1.0 / r) * g / r
    return fac[..., None] * d


def hess_phi(k: complex, x, y):
    """Hessian in x, shape (..., 3, 3); symmetric, trace = -k^2 * phi."""
    k = validate_wavenumber(k)
    d, r = _separation(x, y)
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    gp_over_r = (1j * k - 1.0 / r) * g / r                  # g'(r)/r
    gpp = (-k * k - 2j * k / r + 2.0 / r ** 2) * g          # g''(r)
    rhat = d / r[..., None]
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(3).reshape((1,) * (d.ndim - 1) + (3, 3))
    return (gpp - gp_over_r)[..., None, None] * outer + gp_over_r[..., None, None] * eye


@dataclass(frozen=True)
class MaterialConstants:
    """Values of (mu, gamma) at the distinguished boundary point, and omega.

    k0 = omega * sqrt(mu0 * gamma0) with the root steered into the closed
    first quadrant.
    """

    mu0: complex
    gamma0: complex
    omega: float

    def __post_init__(self):
        if abs(self.mu0) == 0 or abs(self.gamma0) == 0:
            raise KernelError("mu0 and gamma0 must be nonzero")
        if self.omega <= 0:
            raise KernelError("omega must be positive")

    @property
    def k0(self) -> complex:
        root = np.sqrt(complex(self.mu0) * complex(self.gamma0))
        if root.real < 0 or (root.real == 0 and root.imag < 0):
            root = -root
        k0 = self.omega * root
        if k0.real < 0 or k0.imag < 0:
            raise KernelError(f"k0={k0} left the first quadrant")
        return k0


DIPOLE_FLAVORS = ("E0", "H0", "E0p", "H0p", "U0", "V0", "U0p", "V0p")


@dataclass(frozen=True)
class DipoleField:
    """Singular source field anchored at z_delta = x0 + delta * nu(x0).

    `unscaled` drops the constant material prefactor (1/(i omega mu0) for H0,
    -1/(i omega gamma0) for E0p): the curl-of-curl flavors are then exactly
    delta^{3/2} (k0^2 Phi + d1^2 Phi, d12 Phi, d13 Phi) in the frame where
    nu(x0) = e1.
    """

    flavor: str
    delta: float
    z: np.ndarray
    nu0: np.ndarray
    constants: MaterialConstants
    unscaled: bool = False

    def wavenumber(self) -> complex:
        if self.flavor in ("U0", "V0", "U0p", "V0p"):
            return 0.0 + 0.0j
        return self.constants.k0

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def eval(self, x) -> np.ndarray:
        """Field values at points x, shape (..., 3), complex."""
        c = self.constants
        k = self.wavenumber()
        nu0 = self.nu0
        if self.flavor in ("E0", "H0p"):
            scale = self.delta ** 1.5
            return scale * np.cross(grad_phi(k, x, self.z), np.broadcast_to(nu0, np.shape(x)))
        if self.flavor == "U0":
            return self.delta ** 0.5 * np.cross(
                grad_phi(0.0, x, self.z), np.broadcast_to(nu0, np.shape(x)))
        if self.flavor == "V0p":
            fac = 1.0 if self.unscaled else 1j * c.omega * c.gamma0
            return fac * self.delta ** 0.5 * np.cross(
                grad_phi(0.0, x, self.z), np.broadcast_to(nu0, np.shape(x)))
        # curl-curl flavors: Hess(Phi_k) . nu0 + k^2 Phi_k nu0
        hv = hess_phi(k, x, self.z) @ nu0
        if k != 0:
            hv = hv + (k * k * phi(k, x, self.z))[..., None] * nu0
        if self.flavor == "H0":
            fac = 1.0 if self.unscaled else 1.0 / (1j * c.omega * c.mu0)
            return fac * self.delta ** 1.5 * hv
        if self.flavor == "E0p":
            fac = 1.0 if self.unscaled else -1.0 / (1j * c.omega * c.gamma0)
            return fac * self.delta ** 1.5 * hv
        if self.flavor == "U0p":
            return self.delta ** 0.5 * hv
        if self.flavor == "V0":
            fac = 1.0 if self.unscaled else 1.0 / (1j * c.omega * c.mu0)
            return fac * self.delta ** 0.5 * hv
        raise KernelError(f"unknown dipole flavor {self.flavor!r}")


def dipole(flavor: str, delta: float, constants: MaterialConstants,
           domain: DomainDescriptor, unscaled: bool = False) -> DipoleField:
    """Build one of the eight dipole source fields for the given domain.

    Raises if delta is outside (0, delta0) or the flavor is unknown.
    """
    if flavor not in DIPOLE_FLAVORS:
        raise KernelError(f"unknown dipole flavor {flavor!r}")
    z = exterior_offset(domain, delta)
    return DipoleField(
        flavor=flavor, delta=delta, z=z, nu0=domain.nu0,
        constants=constants, unscaled=unscaled,
    )


def maxwell_pair(flavor: str, delta: float, constants: MaterialConstants,
                 domain: DomainDescriptor):
    """The (electric, magnetic) pair for the unprimed/primed recursions."""
    if flavor == "unprimed":
        return (dipole("E0", delta, constants, domain),
                dipole("H0", delta, constants, domain))
    if flavor == "primed":
        return (dipole("E0p", delta, constants, domain),
                dipole("H0p", delta, constants, domain))
    raise KernelError("flavor must be 'unprimed' or 'primed'")
