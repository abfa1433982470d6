"""Spectral Sobolev norms on the unit sphere and on the flat cap patch.

Scalar fields are expanded in orthonormal spherical harmonics, tangential
fields in the surface-gradient / surface-curl vector families, with the norm
weight (1 + l(l+1))^s.  The cap patch uses a smooth radial cutoff followed by
a periodic 2-D Fourier transform with weight (1 + |xi|^2)^s.

The H^{-1/2}_Div trace space from the transmission theory is referenced by
the surrounding analysis but never evaluated here; no negative-order norm is
needed by any probe (the smallest index used is s = 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .geometry import SphereRule
from .harmonics import (
    degrees,
    normalized_legendre,
    normalized_legendre_dtheta,
    pack_index,
)


class SobolevError(ValueError):
    pass


class SphereTransform:
    """Forward/inverse spherical-harmonic transform bound to a tensor rule.

    The rule must be exact for polynomials of degree 2L, i.e. its polar order
    must be at least L+1 and its azimuth count at least 2L+1.
    """

    def __init__(self, rule: SphereRule, L: int):
        if rule.order < L + 1 or rule.n_phi < 2 * L + 1:
            raise SobolevError(
                f"rule order {rule.order} too coarse for degree {L}"
            )
        self.rule = rule
        self.L = L
        x = np.cos(rule.theta)
        self.P = normalized_legendre(L, x)                    # (L+1, L+1, ntheta)
        self.dP = normalized_legendre_dtheta(L, rule.theta, self.P)
        self.sin_theta = np.sin(rule.theta)
        self.w_theta = rule.w_theta
        self.w_phi = 2.0 * np.pi / rule.n_phi
        self.ls = degrees(L)

    # -- scalar ------------------------------------------------------------

    def _phi_modes(self, values_grid: np.ndarray) -> np.ndarray:
        """F[m, itheta] = w_phi * sum_j f(theta_i, phi_j) e^{-i m phi_j},
        for m = -L..L (indexed m+L)."""
        fft = np.fft.fft(values_grid, axis=1)  # sum_j f e^{-2pi i m j / nphi}
        nphi = values_grid.shape[1]
        F = np.empty((2 * self.L + 1, values_grid.shape[0]), dtype=complex)
        for m in range(-self.L, self.L + 1):
            F[m + self.L] = self.w_phi * fft[:, m % nphi]
        return F

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Packed coefficients c_lm of a scalar nodal field."""
        grid = np.asarray(values).reshape(self.rule.n_theta, self.rule.n_phi)
        F = self._phi_modes(grid)
        c = np.zeros((self.L + 1) ** 2, dtype=complex)
        wt = self.w_theta
        for m in range(-self.L, self.L + 1):
            am = abs(m)
            sigma = 1.0 if m >= 0 else (-1.0) ** am
            for l in range(am, self.L + 1):
                c[pack_index(l, m)] = sigma * np.sum(wt * self.P[l, am] * F[m + self.L])
        return c

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values of a packed coefficient vector (inverse of analyze
        for band-limited fields)."""
        G = np.zeros((2 * self.L + 1, self.rule.n_theta), dtype=complex)
        for m in range(-self.L, self.L + 1):
            am = abs(m)
            sigma = 1.0 if m >= 0 else (-1.0) ** am
            for l in range(am, self.L + 1):
                G[m + self.L] += sigma * coeffs[pack_index(l, m)] * self.P[l, am]
        nphi = self.rule.n_phi
        spec = np.zeros((self.rule.n_theta, nphi), dtype=complex)
        for m in range(-self.L, self.L + 1):
            spec[:, m % nphi] += G[m + self.L]
        vals = np.fft.ifft(spec, axis=1) * nphi
        return vals.ravel()

    # -- tangential ---------------------------------------------------------

    def _polar_frame(self):
        th = self.rule.theta[:, None]
        ph = self.rule.phi[None, :]
        e_t = np.stack([
            np.broadcast_to(np.cos(th) * np.cos(ph), (self.rule.n_theta, self.rule.n_phi)),
            np.broadcast_to(np.cos(th) * np.sin(ph), (self.rule.n_theta, self.rule.n_phi)),
            np.broadcast_to(-np.sin(th), (self.rule.n_theta, self.rule.n_phi)),
        ], axis=-1)
        e_p = np.stack([
            np.broadcast_to(-np.sin(ph), (self.rule.n_theta, self.rule.n_phi)),
            np.broadcast_to(np.cos(ph), (self.rule.n_theta, self.rule.n_phi)),
            np.zeros((self.rule.n_theta, self.rule.n_phi)),
        ], axis=-1)
        return e_t, e_p

    def analyze_tangential(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients (a, b) against the surface-gradient family U_lm and
        the surface-curl family X_lm = nu x U_lm, l >= 1."""
        vals = np.asarray(values).reshape(self.rule.n_theta, self.rule.n_phi, 3)
        e_t, e_p = self._polar_frame()
        f_t = np.sum(vals * e_t, axis=-1)
        f_p = np.sum(vals * e_p, axis=-1)
        Ft = self._phi_modes(f_t)
        Fp = self._phi_modes(f_p)
        a = np.zeros((self.L + 1) ** 2, dtype=complex)
        b = np.zeros((self.L + 1) ** 2, dtype=complex)
        wt = self.w_theta
        inv_sin = 1.0 / self.sin_theta
        for m in range(-self.L, self.L + 1):
            am = abs(m)
            sigma = 1.0 if m >= 0 else (-1.0) ** am
            for l in range(max(am, 1), self.L + 1):
                scale = sigma / np.sqrt(l * (l + 1.0))
                dv = self.dP[l, am]
                pv = self.P[l, am] * inv_sin
                a[pack_index(l, m)] = scale * np.sum(
                    wt * (dv * Ft[m + self.L] - 1j * m * pv * Fp[m + self.L]))
                b[pack_index(l, m)] = scale * np.sum(
                    wt * (1j * m * pv * Ft[m + self.L] + dv * Fp[m + self.L]))
        return a, b

    def synthesize_tangential(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Nodal Cartesian values of sum a_lm U_lm + b_lm X_lm."""
        nth, nph = self.rule.n_theta, self.rule.n_phi
        Gt = np.zeros((2 * self.L + 1, nth), dtype=complex)
        Gp = np.zeros((2 * self.L + 1, nth), dtype=complex)
        inv_sin = 1.0 / self.sin_theta
        for m in range(-self.L, self.L + 1):
            am = abs(m)
            sigma = 1.0 if m >= 0 else (-1.0) ** am
            for l in range(max(am, 1), self.L + 1):
                scale = sigma / np.sqrt(l * (l + 1.0))
                dv = self.dP[l, am]
                pv = self.P[l, am] * inv_sin
                ai = a[pack_index(l, m)]
                bi = b[pack_index(l, m)]
                Gt[m + self.L] += scale * (ai * dv - bi * 1j * m * pv)
                Gp[m + self.L] += scale * (ai * 1j * m * pv + bi * dv)
        spec_t = np.zeros((nth, nph), dtype=complex)
        spec_p = np.zeros((nth, nph), dtype=complex)
        for m in range(-self.L, self.L + 1):
            spec_t[:, m % nph] += Gt[m + self.L]
            spec_p[:, m % nph] += Gp[m + self.L]
        f_t = np.fft.ifft(spec_t, axis=1) * nph
        f_p = np.fft.ifft(spec_p, axis=1) * nph
        e_t, e_p = self._polar_frame()
        out = f_t[..., None] * e_t + f_p[..., None] * e_p
        return out.reshape(-1, 3)


@dataclass
class SobolevSpectrum:
    """Coefficient table with an s-indexed spectral norm."""

    geometry: str                       # "sphere-scalar" | "sphere-tangential"
    L: int
    coeffs: np.ndarray                  # packed; tangential: (2, ncoeff)

    def norm(self, s: float) -> float:
        ls = degrees(self.L).astype(float)
        w = (1.0 + ls * (ls + 1.0)) ** s
        mags = np.abs(self.coeffs) ** 2
        if mags.ndim == 2:
            mags = mags.sum(axis=0)
        return float(np.sqrt(np.sum(w * mags)))


def scalar_spectrum(values: np.ndarray, rule: SphereRule, L: int,
                    transform: Optional[SphereTransform] = None) -> SobolevSpectrum:
    tr = transform or SphereTransform(rule, L)
    return SobolevSpectrum("sphere-scalar", L, tr.analyze(values))


def tangential_spectrum(values: np.ndarray, rule: SphereRule, L: int,
                        transform: Optional[SphereTransform] = None,
                        tangency_tol: float = 1e-8) -> SobolevSpectrum:
    vals = np.asarray(values).reshape(-1, 3)
    normal_part = np.abs(np.sum(vals * rule.nodes, axis=-1))
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if np.max(normal_part) > tangency_tol * max(1.0, scale):
        raise SobolevError("input field is not tangential")
    tr = transform or SphereTransform(rule, L)
    a, b = tr.analyze_tangential(vals)
    return SobolevSpectrum("sphere-tangential", L, np.stack([a, b]))


def surface_traces(values: np.ndarray, rule: SphereRule, L: int,
                   transform: Optional[SphereTransform] = None):
    """Split a 3-vector surface field into (tangential part, normal part,
    surface divergence of the tangential part)."""
    vals = np.asarray(values).reshape(-1, 3)
    nu = rule.nodes
    normal = np.sum(vals * nu, axis=-1)
    tang = vals - normal[:, None] * nu
    tr = transform or SphereTransform(rule, L)
    a, _ = tr.analyze_tangential(tang)
    ls = degrees(L).astype(float)
    div_coeffs = -np.sqrt(ls * (ls + 1.0)) * a
    div = tr.synthesize(div_coeffs)
    return tang, normal, div


# ---------------------------------------------------------------------------
# flat cap patch norms
# ---------------------------------------------------------------------------

def _smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    def bump(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out
    num = bump(t)
    return num / (num + bump(1.0 - t))


@dataclass(frozen=True)
class PatchGrid:
    """Uniform grid on the flat cap {y1 = 0}, covering [-A, A]^2."""

    window: float       # cutoff radius; cutoff == 1 inside window/2, 0 outside
    n: int
    cap_radius: float = 1.0

    def __post_init__(self):
        if not (0 < self.window < self.cap_radius):
            raise SobolevError("window must lie inside the cap radius")

    @property
    def halfside(self) -> float:
        return self.window

    def axes(self):
        # cell-centered grid, periodic box of side 2A
        A = self.halfside
        step = 2.0 * A / self.n
        x = -A + step * (np.arange(self.n) + 0.5)
        return x, step

    def points3d(self) -> np.ndarray:
        x, _ = self.axes()
        X2, X3 = np.meshgrid(x, x, indexing="ij")
        pts = np.zeros((self.n * self.n, 3))
        pts[:, 1] = X2.ravel()
        pts[:, 2] = X3.ravel()
        return pts

    def cutoff(self) -> np.ndarray:
        x, _ = self.axes()
        X2, X3 = np.meshgrid(x, x, indexing="ij")
        rho = np.hypot(X2, X3)
        return 1.0 - _smoothstep((rho - 0.5 * self.window) / (0.5 * self.window))


def patch_norm(values: np.ndarray, grid: PatchGrid, s: float) -> float:
    """Windowed-Fourier H^s norm of a field sampled on the cap grid."""
    if not (0.0 <= s <= 4.0):
        raise SobolevError("s must lie in [0, 4]")
    vals = np.asarray(values).reshape(grid.n, grid.n)
    c = vals * grid.cutoff()
    _, step = grid.axes()
    box = 2.0 * grid.halfside
    chat = np.fft.fft2(c) * (step * step / box)
    freq = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=step)
    K2 = freq[:, None] ** 2 + freq[None, :] ** 2
    return float(np.sqrt(np.sum((1.0 + K2) ** s * np.abs(chat) ** 2)))
