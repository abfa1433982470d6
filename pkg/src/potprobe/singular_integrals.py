"""Singular volume integrals over the flat-capped cylinder and their
asymptotics.

The family under study, for source point z_d = (d, 0, 0) just outside the
cap and m >= 1:

    Itilde_m(d) = int_Om (1/|y|) (d/dy1 1/|y - z_d|) y1^m dy
                = -(pi/2^m) d^m ln d + f_m(d),

with f_m smooth on [0, d0], and the derived blow-up integrals

    I_{2m-1}(d) = d^{3/2} int (1/|y|) (d1^{2m+2} 1/|y-z_d|) y1^{2m-1} dy
    I_{2m}(d)   = d^{3/2} int (1/|y|) d1[(d1^{2m+2} 1/|y-z_d|) y1^{2m}] dy

which blow up like -pi (2m-1)!/2^{2m-1} d^{-1/2} and -pi (2m)!/2^{2m} d^{-1/2}.

Two independent evaluation paths are provided: `direct` (graded volume
quadrature with exact closed-form axial kernel derivatives) and
`semianalytic` (the d-derivative identities above, with f_m derivatives
obtained by Taylor-jet differentiation under the integral sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .geometry import lemma36_cylinder, make_volume_quadrature
from .taylor import Jet

DELTA0 = 0.25


class SingularIntegralError(ValueError):
    pass


@dataclass(frozen=True)
class LemmaIntegralSpec:
    parity: Literal["odd", "even"]
    m: int
    delta: float

    def __post_init__(self):
        if self.m < 1:
            raise SingularIntegralError("m must be >= 1")
        if self.m > 4:
            raise SingularIntegralError("m > 4 exceeds the derivative-order guard")
        if not (0.0 < self.delta < DELTA0):
            raise SingularIntegralError("delta outside (0, delta0)")
        if self.parity not in ("odd", "even"):
            raise SingularIntegralError("parity must be 'odd' or 'even'")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def inner_integral_closed(y1: float, delta: float) -> float:
    """int_{y1}^{sqrt(y1^2+1)} (s^2 + (y1+delta)^2 - y1^2)^{-3/2} ds.

    Equals (1/(delta(2 y1 + delta))) (sqrt(y1^2+1)/sqrt((y1+delta)^2+1)
    - 1 + delta/(y1+delta)).
    """
    if not (0.0 < y1 < 1.0):
        raise SingularIntegralError("y1 must lie in (0, 1)")
    if not (0.0 < delta < DELTA0):
        raise SingularIntegralError("delta outside (0, delta0)")
    bracket = (np.sqrt(y1 * y1 + 1.0) / np.sqrt((y1 + delta) ** 2 + 1.0)
               - 1.0 + delta / (y1 + delta))
    return float(bracket / (delta * (2.0 * y1 + delta)))


_GL_CACHE = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        x, w = leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)   # on [0, 1]
    return _GL_CACHE[n]


def _f_m_jet(m: int, delta: float, order: int, nquad: int = 200) -> Jet:
    """Jet of f_m at delta: elementary bracket plus the smooth integral term.

    The elementary part is the antiderivative of the binomial expansion of
    y1^m/(2 y1 + delta) with its log(delta) part removed:

      pi (delta/2)^m ln(2 + delta)
      + pi sum_{j=1}^m (-1)^j (delta/2)^{m-j} C(m,j)/j [(1+delta/2)^j - (delta/2)^j]
    """
    d = Jet.variable(delta, order)
    half = d * 0.5
    elem = math.pi * half.powi(m) * (d + 2.0).log()
    for j in range(1, m + 1):
        coef = math.pi * (-1.0) ** j * math.comb(m, j) / j
        elem = elem + coef * half.powi(m - j) * ((half + 1.0).powi(j) - half.powi(j))

    y, w = _gl(nquad)
    yj = Jet.constant(y, order)
    ypd = yj + d
    b = (ypd * ypd + 1.0).sqrt()
    sq_y = Jet.constant(np.sqrt(y * y + 1.0), order)
    integrand = (-(ypd) * yj.powi(m)) / (b * (sq_y + b))
    smooth_coeffs = (2.0 * math.pi * (-1.0) ** m) * (integrand.c @ w)
    return Jet(elem.c + smooth_coeffs)


def f_m(m: int, delta: float, nquad: int = 200) -> float:
    """The smooth remainder in Itilde_m(delta) = -(pi/2^m) delta^m ln delta + f_m."""
    return float(_f_m_jet(m, delta, 0, nquad).c[0])


def f_m_derivatives(m: int, delta: float, order: int, nquad: int = 200) -> np.ndarray:
    """d^n f_m / d delta^n for n = 0..order."""
    return _f_m_jet(m, delta, order, nquad).derivatives()


def tilde_I_closed(m: int, delta: float, nquad: int = 200) -> float:
    if m < 1 or not (0.0 < delta < DELTA0):
        raise SingularIntegralError("invalid (m, delta)")
    return float(-(math.pi / 2 ** m) * delta ** m * math.log(delta)
                 + f_m(m, delta, nquad))


# ---------------------------------------------------------------------------
# exact axial derivatives of the Newtonian kernel
# ---------------------------------------------------------------------------

def axial_derivative_newtonian(n: int, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """d^n/dy1^n (1/|y - z|) = (-1)^n n! P_n(cos theta) / |y-z|^{n+1},
    with cos theta = (y1 - z1)/|y - z| (z on the y1 axis)."""
    d = y - z[None, :]
    r = np.linalg.norm(d, axis=-1)
    ct = d[:, 0] / r
    # Legendre P_n by upward recurrence
    p_prev = np.ones_like(ct)
    if n == 0:
        return 1.0 / r
    p = ct.copy()
    for l in range(1, n):
        p, p_prev = ((2 * l + 1) * ct * p - l * p_prev) / (l + 1), p
    return (-1.0) ** n * math.factorial(n) * p / r ** (n + 1)


def tilde_I_direct(m: int, delta: float, level: int = 10, order: int = 4) -> float:
    """Graded volume quadrature of the defining Itilde_m integrand."""
    cyl = lemma36_cylinder()
    rule = make_volume_quadrature(cyl, level, singular_center=np.zeros(3),
                                  order=order, n_phi=1)
    z = np.array([delta, 0.0, 0.0])
    y = rule.nodes
    vals = (1.0 / np.linalg.norm(y, axis=-1)
            * axial_derivative_newtonian(1, y, z)
            * y[:, 0] ** m)
    return float(rule.weights @ vals)


# ---------------------------------------------------------------------------
# the blow-up integrals
# ---------------------------------------------------------------------------

def _I_direct(spec: LemmaIntegralSpec, level: int, order: int) -> float:
    cyl = lemma36_cylinder()
    rule = make_volume_quadrature(cyl, level, singular_center=np.zeros(3),
                                  order=order, n_phi=1)
    z = np.array([spec.delta, 0.0, 0.0])
    y = rule.nodes
    inv_y = 1.0 / np.linalg.norm(y, axis=-1)
    m = spec.m
    if spec.parity == "odd":
        integrand = (inv_y * axial_derivative_newtonian(2 * m + 2, y, z)
                     * y[:, 0] ** (2 * m - 1))
    else:
        # d1[(d1^{2m+2} K) y1^{2m}] expanded by the product rule
        integrand = inv_y * (
            axial_derivative_newtonian(2 * m + 3, y, z) * y[:, 0] ** (2 * m)
            + 2 * m * axial_derivative_newtonian(2 * m + 2, y, z)
            * y[:, 0] ** (2 * m - 1))
    return float(spec.delta ** 1.5 * (rule.weights @ integrand))


def _I_semianalytic(spec: LemmaIntegralSpec, nquad: int) -> float:
    m, d = spec.m, spec.delta
    if spec.parity == "odd":
        lead = -math.pi * math.factorial(2 * m - 1) / 2 ** (2 * m - 1) * d ** -0.5
        fder = f_m_derivatives(2 * m - 1, d, 2 * m + 1, nquad)[2 * m + 1]
        return float(lead - d ** 1.5 * fder)
    lead = -math.pi * math.factorial(2 * m) / 2 ** (2 * m) * d ** -0.5
    f_even = f_m_derivatives(2 * m, d, 2 * m + 2, nquad)[2 * m + 2]
    f_odd = f_m_derivatives(2 * m - 1, d, 2 * m + 1, nquad)[2 * m + 1]
    return float(lead + d ** 1.5 * (f_even - 2 * m * f_odd))


def I_value(spec: LemmaIntegralSpec, method: str = "semianalytic",
            level: int = None, order: int = 4, nquad: int = 200) -> float:
    """Evaluate I_{2m-1} or I_{2m} by the requested path."""
    if method == "direct":
        if level is None:
            level = max(10, int(np.ceil(np.log2(1.0 / spec.delta))) + 4)
        return _I_direct(spec, level, order)
    if method == "semianalytic":
        return _I_semianalytic(spec, nquad)
    raise SingularIntegralError(f"unknown method {method!r}")


def leading_coefficient(spec: LemmaIntegralSpec) -> float:
    """The exact coefficient of delta^{-1/2} in I_m."""
    m = spec.m
    if spec.parity == "odd":
        return -math.pi * math.factorial(2 * m - 1) / 2 ** (2 * m - 1)
    return -math.pi * math.factorial(2 * m) / 2 ** (2 * m)


# ---------------------------------------------------------------------------
# asymptotic fitting
# ---------------------------------------------------------------------------

@dataclass
class AsymptoticFit:
    deltas: np.ndarray
    values: np.ndarray
    exponent: float
    coefficient: float
    residual: float
    model: str


def fit_asymptotics(sweep: Sequence, model: str = "power") -> AsymptoticFit:
    """Least-squares fit of log|value| against log(delta).

    `power` fits value = c * delta^e; `power-log` fits
    value = c * delta^e * ln(delta).
    """
    sweep = [(float(d), float(v)) for d, v in sweep]
    if len(sweep) < 4:
        raise SingularIntegralError("need at least 4 sweep points")
    deltas = np.array([d for d, _ in sweep])
    values = np.array([v for _, v in sweep])
    if np.any(~np.isfinite(values)) or np.any(values == 0.0):
        raise SingularIntegralError("degenerate sweep values")
    if not np.all(np.diff(deltas) < 0):
        raise SingularIntegralError("delta grid must be strictly decreasing")
    if deltas[0] / deltas[-1] < 8.0:
        raise SingularIntegralError("sweep must span a factor >= 8 in delta")
    ly = np.log(np.abs(values))
    if model == "power-log":
        ly = ly - np.log(np.abs(np.log(deltas)))
    elif model != "power":
        raise SingularIntegralError(f"unknown model {model!r}")
    lx = np.log(deltas)
    A = np.stack([np.ones_like(lx), lx], axis=1)
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ sol - ly) ** 2)))
    sign = np.sign(values[-1])
    return AsymptoticFit(
        deltas=deltas, values=values,
        exponent=float(sol[1]),
        coefficient=float(sign * np.exp(sol[0])),
        residual=resid, model=model,
    )
