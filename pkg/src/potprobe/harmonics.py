"""Fully normalized spherical harmonics and stable recurrences.

Conventions: Y_lm(theta, phi) = Nbar_l^m(cos theta) e^{i m phi} with
Condon-Shortley phase and unit L2 norm on the sphere; Y_{l,-m} =
(-1)^m conj(Y_lm).
"""

from __future__ import annotations

import numpy as np


def normalized_legendre(L: int, x: np.ndarray) -> np.ndarray:
    """Nbar_l^m(x) for 0 <= m <= l <= L, shape (L+1, L+1, *x.shape).

    Nbar includes the sqrt((2l+1)(l-m)!/(4 pi (l+m)!)) normalization so that
    Y_lm = Nbar_l^m e^{i m phi} is orthonormal.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    P = np.zeros((L + 1, L + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        P[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, L):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def normalized_legendre_dtheta(L: int, theta: np.ndarray, P=None) -> np.ndarray:
    """d/dtheta of Nbar_l^m(cos theta); theta must avoid the poles."""
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    if P is None:
        P = normalized_legendre(L, x)
    dP = np.zeros_like(P)
    for m in range(0, L + 1):
        for l in range(m, L + 1):
            t = l * x * P[l, m]
            if l > m:
                t = t - np.sqrt((2 * l + 1.0) * (l * l - m * m) / (2 * l - 1.0)) * P[l - 1, m]
            dP[l, m] = t / s
    return dP


def ylm_scattered(L: int, theta, phi) -> np.ndarray:
    """Y_lm at scattered points, packed as (n_coeff, npts) with n_coeff =
    (L+1)^2 and index order (l, m) for m = -l..l (see `pack_index`)."""
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    P = normalized_legendre(L, np.cos(theta))
    e = np.exp(1j * np.outer(np.arange(L + 1), phi))  # (L+1, n)
    out = np.empty(((L + 1) ** 2, theta.size), dtype=complex)
    for l in range(L + 1):
        for m in range(0, l + 1):
            v = P[l, m] * e[m]
            out[pack_index(l, m)] = v
            if m > 0:
                out[pack_index(l, -m)] = (-1) ** m * np.conj(v)
    return out


def pack_index(l: int, m: int) -> int:
    return l * l + l + m


def degrees(L: int) -> np.ndarray:
    """Array of degree l per packed coefficient index."""
    out = np.empty((L + 1) ** 2, dtype=int)
    for l in range(L + 1):
        out[l * l:(l + 1) ** 2] = l
    return out
