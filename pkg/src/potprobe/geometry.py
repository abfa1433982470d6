"""Domains, surfaces and quadrature rules.

Two concrete shapes are supported: the unit sphere/ball and a flat-capped
cylinder ``{y : y2^2 + y3^2 < 1, -1 < y1 < 0}`` whose distinguished boundary
point is the origin with outward normal e1.  Volume rules are built from
dyadic (grading ratio 2) panel subdivision with fixed-order Gauss-Legendre
nodes per panel, optionally graded toward a singular center.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

DELTA0_DEFAULT = 0.25


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Immutable node/weight set, optionally tagged with grading metadata."""

    nodes: np.ndarray          # (n, 3)
    weights: np.ndarray        # (n,), all > 0
    kind: str                  # "sphere-surface" | "ball-volume" | "cylinder-volume"
    grading_center: Optional[np.ndarray] = None
    grading_levels: int = 0

    def __post_init__(self):
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise GeometryError("node/weight count mismatch")
        if np.any(self.weights <= 0):
            raise GeometryError("nonpositive quadrature weight")

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values: np.ndarray) -> complex:
        return np.tensordot(self.weights, values, axes=(0, 0))


@dataclass(frozen=True)
class SphereRule(QuadratureRule):
    """Tensor Gauss-Legendre (polar) x trapezoid (azimuth) rule on S^2.

    Exact for spherical harmonics up to degree 2*order - 1.
    """

    theta: np.ndarray = None   # (n_theta,)
    phi: np.ndarray = None     # (n_phi,)
    w_theta: np.ndarray = None
    order: int = 0

    @property
    def n_theta(self) -> int:
        return self.theta.shape[0]

    @property
    def n_phi(self) -> int:
        return self.phi.shape[0]

    def normals(self) -> np.ndarray:
        return self.nodes  # unit sphere: nu(x) = x


def make_sphere_quadrature(order: int) -> SphereRule:
    """Product rule on the unit sphere with `order` polar Gauss nodes.

    Weights sum to 4*pi; spherical harmonics of degree 1..2*order-1
    integrate to zero.
    """
    if order < 1:
        raise GeometryError("sphere quadrature order must be >= 1")
    t, wt = leggauss(order)            # t = cos(theta) on (-1, 1)
    theta = np.arccos(t)[::-1]
    wt = wt[::-1]
    n_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)
    st = np.sin(theta)
    nodes = np.empty((order * n_phi, 3))
    nodes[:, 0] = np.outer(st, np.cos(phi)).ravel()
    nodes[:, 1] = np.outer(st, np.sin(phi)).ravel()
    nodes[:, 2] = np.outer(np.cos(theta), np.ones(n_phi)).ravel()
    weights = np.outer(wt, wphi).ravel()
    return SphereRule(
        nodes=nodes, weights=weights, kind="sphere-surface",
        theta=theta, phi=phi, w_theta=wt, order=order,
    )


@dataclass(frozen=True)
class SurfaceDescriptor:
    kind: str                                  # "unit-sphere" | "flat-disk-patch"
    normal: Callable[[np.ndarray], np.ndarray] = None

    def nu(self, x: np.ndarray) -> np.ndarray:
        return self.normal(x)


def _sphere_normal(x):
    x = np.atleast_2d(x)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _cap_normal(x):
    x = np.atleast_2d(x)
    out = np.zeros_like(x)
    out[:, 0] = 1.0
    return out


UNIT_SPHERE = SurfaceDescriptor(kind="unit-sphere", normal=_sphere_normal)
FLAT_CAP = SurfaceDescriptor(kind="flat-disk-patch", normal=_cap_normal)


@dataclass(frozen=True)
class DomainDescriptor:
    """Unit ball or the Lemma-3.6 capped cylinder, with the distinguished
    boundary point x0 and its outward normal."""

    kind: str                     # "unit-ball" | "lemma36-cylinder"
    x0: np.ndarray
    nu0: np.ndarray
    boundary: SurfaceDescriptor
    delta0: float = DELTA0_DEFAULT
    diameter: float = 2.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "unit-ball":
            return np.linalg.norm(pts, axis=-1) < 1.0
        return (
            (pts[:, 1] ** 2 + pts[:, 2] ** 2 < 1.0)
            & (pts[:, 0] > -1.0)
            & (pts[:, 0] < 0.0)
        )

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean distance from points to the closed domain (0 inside)."""
        pts = np.atleast_2d(pts)
        if self.kind == "unit-ball":
            return np.maximum(np.linalg.norm(pts, axis=-1) - 1.0, 0.0)
        dx = np.maximum(np.maximum(pts[:, 0] - 0.0, -1.0 - pts[:, 0]), 0.0)
        drho = np.maximum(np.hypot(pts[:, 1], pts[:, 2]) - 1.0, 0.0)
        return np.hypot(dx, drho)


def unit_ball(delta0: float = DELTA0_DEFAULT) -> DomainDescriptor:
    return DomainDescriptor(
        kind="unit-ball",
        x0=np.array([0.0, 0.0, 1.0]),
        nu0=np.array([0.0, 0.0, 1.0]),
        boundary=UNIT_SPHERE,
        delta0=delta0,
        diameter=2.0,
    )


def lemma36_cylinder(delta0: float = DELTA0_DEFAULT) -> DomainDescriptor:
    return DomainDescriptor(
        kind="lemma36-cylinder",
        x0=np.zeros(3),
        nu0=np.array([1.0, 0.0, 0.0]),
        boundary=FLAT_CAP,
        delta0=delta0,
        diameter=float(np.sqrt(5.0)),
    )


def exterior_offset(domain: DomainDescriptor, delta: float) -> np.ndarray:
    """Source point z_delta = x0 + delta * nu(x0), strictly outside the domain."""
    if not (0.0 < delta < domain.delta0):
        raise GeometryError(
            f"delta={delta} outside (0, {domain.delta0})"
        )
    return domain.x0 + delta * domain.nu0


# ---------------------------------------------------------------------------
# panel helpers
# ---------------------------------------------------------------------------

def _gauss_on_panels(breaks: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights on the union of intervals given by breaks."""
    t, w = leggauss(order)
    a = breaks[:-1][:, None]
    b = breaks[1:][:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    ww = 0.5 * (b - a) * w[None, :]
    return x.ravel(), ww.ravel()


def dyadic_breaks(a: float, b: float, levels: int, toward: str = "b") -> np.ndarray:
    """Breakpoints of [a, b] refined geometrically (ratio 2) toward one end."""
    frac = 2.0 ** (-np.arange(levels + 1, dtype=float))  # 1, 1/2, ..., 2^-L
    if toward == "b":
        pts = b - (b - a) * frac
        return np.concatenate([pts, [b]])
    pts = a + (b - a) * frac[::-1]
    return np.concatenate([[a], pts])


def _uniform_breaks(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n + 1)


# ---------------------------------------------------------------------------
# volume rules
# ---------------------------------------------------------------------------

def _ball_rule_plain(level: int, order: int, ang_order: int) -> QuadratureRule:
    r, wr = _gauss_on_panels(_uniform_breaks(0.0, 1.0, max(level, 1)), order)
    sph = make_sphere_quadrature(ang_order)
    nodes = (r[:, None, None] * sph.nodes[None, :, :]).reshape(-1, 3)
    weights = (wr[:, None] * r[:, None] ** 2 * sph.weights[None, :]).ravel()
    return QuadratureRule(nodes=nodes, weights=weights, kind="ball-volume")


def _ball_rule_boundary_anchor(anchor, level, order, n_t, n_phi, t_levels=3):
    """Star-shaped coordinates around a boundary point a of the unit ball:
    y = a + s*u with u.a = t in [-1, 0) and chord length R = -2t."""
    a = anchor / np.linalg.norm(anchor)
    tb = -dyadic_breaks(0.0, 1.0, t_levels, toward="a")[::-1]  # [-1 .. 0] graded to 0
    t, wt = _gauss_on_panels(tb, max(n_t, 2))
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    # orthonormal frame (e1p, e2p, a)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(helper, a)) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1p = np.cross(a, helper)
    e1p /= np.linalg.norm(e1p)
    e2p = np.cross(a, e1p)

    st = np.sqrt(np.maximum(1.0 - t ** 2, 0.0))
    u = (
        st[:, None, None] * (np.cos(phi)[None, :, None] * e1p + np.sin(phi)[None, :, None] * e2p)
        + t[:, None, None] * a
    )  # (nt, nphi, 3)
    R = -2.0 * t                                     # chord length per direction
    sref, wsref = _gauss_on_panels(dyadic_breaks(0.0, 1.0, level, toward="a"), order)
    s = R[:, None] * sref[None, :]                   # (nt, ns)
    ws = R[:, None] * wsref[None, :]
    nodes = a[None, None, None, :] + s[:, None, :, None] * u[:, :, None, :]
    weights = np.broadcast_to(
        wt[:, None, None] * wphi * ws[:, None, :] * s[:, None, :] ** 2,
        nodes.shape[:3])
    return QuadratureRule(
        nodes=nodes.reshape(-1, 3),
        weights=weights.ravel().copy(),
        kind="ball-volume",
        grading_center=np.array(anchor, dtype=float),
        grading_levels=level,
    )


def _ball_rule_interior_anchor(center, level, order, ang_order):
    """Star-shaped coordinates around an interior point of the unit ball."""
    c = np.asarray(center, dtype=float)
    sph = make_sphere_quadrature(ang_order)
    u = sph.nodes
    cu = u @ c
    R = -cu + np.sqrt(np.maximum(1.0 - c @ c + cu ** 2, 0.0))
    sref, wsref = _gauss_on_panels(dyadic_breaks(0.0, 1.0, level, toward="a"), order)
    s = R[:, None] * sref[None, :]
    ws = R[:, None] * wsref[None, :]
    nodes = c[None, None, :] + s[:, :, None] * u[:, None, :]
    weights = sph.weights[:, None] * ws * s ** 2
    return QuadratureRule(
        nodes=nodes.reshape(-1, 3),
        weights=weights.ravel(),
        kind="ball-volume",
        grading_center=c,
        grading_levels=level,
    )


def _cylinder_rule(level, order, n_phi, graded):
    if graded:
        b1 = -dyadic_breaks(0.0, 1.0, level, toward="a")[::-1]   # y1 in [-1,0] -> 0
        brho = dyadic_breaks(0.0, 1.0, level, toward="a")        # rho in [0,1] -> 0
    else:
        b1 = _uniform_breaks(-1.0, 0.0, max(level, 1))
        brho = _uniform_breaks(0.0, 1.0, max(level, 1))
    y1, w1 = _gauss_on_panels(b1, order)
    rho, wrho = _gauss_on_panels(brho, order)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    nodes = np.empty((y1.size, rho.size, n_phi, 3))
    nodes[..., 0] = y1[:, None, None]
    nodes[..., 1] = (rho[None, :, None] * np.cos(phi)[None, None, :])
    nodes[..., 2] = (rho[None, :, None] * np.sin(phi)[None, None, :])
    weights = w1[:, None, None] * (wrho * rho)[None, :, None] * np.full(n_phi, wphi)[None, None, :]
    return QuadratureRule(
        nodes=nodes.reshape(-1, 3),
        weights=weights.ravel(),
        kind="cylinder-volume",
        grading_center=np.zeros(3) if graded else None,
        grading_levels=level if graded else 0,
    )


def make_volume_quadrature(
    domain: DomainDescriptor,
    level: int,
    singular_center: Optional[np.ndarray] = None,
    order: int = 4,
    ang_order: int = 12,
    n_phi: int = 16,
) -> QuadratureRule:
    """Volume rule covering the domain, graded toward `singular_center` if given.

    Grading is dyadic (ratio 2 per level); `level` counts refinement levels
    toward the center.  The center may sit inside the closed domain or within
    delta0 of its boundary; anything farther than the domain diameter is
    rejected.
    """
    if level < 1:
        raise GeometryError("level must be >= 1")
    if singular_center is not None:
        c = np.asarray(singular_center, dtype=float)
        d = float(domain.distance(c[None, :])[0])
        if d > domain.diameter:
            raise GeometryError("singular_center too far from the domain")

    if domain.kind == "unit-ball":
        if singular_center is None:
            return _ball_rule_plain(level, order, ang_order)
        c = np.asarray(singular_center, dtype=float)
        if np.linalg.norm(c) >= 1.0 - 1e-12:
            return _ball_rule_boundary_anchor(c, level, order, order, n_phi)
        return _ball_rule_interior_anchor(c, level, order, ang_order)

    if domain.kind == "lemma36-cylinder":
        if singular_center is not None:
            c = np.asarray(singular_center, dtype=float)
            axis_dist = np.hypot(c[1], c[2])
            if axis_dist > 0.5 or c[0] < -0.5:
                raise GeometryError(
                    "cylinder grading is implemented for centers near the "
                    "distinguished corner x0 = 0 only"
                )
            return _cylinder_rule(level, order, n_phi, graded=True)
        return _cylinder_rule(level, order, n_phi, graded=False)

    raise GeometryError(f"unknown domain kind {domain.kind!r}")


def half_ball_rule(center, radius, inward, level, order, n_t=4, n_phi=8,
                   extra_break: Optional[float] = None):
    """Rule on the half-ball B_radius(center) cut by the plane through `center`
    with inward half-space direction `inward` (points y with (y-c).inward >= 0).

    Radial panels are dyadic toward the center, so kernels like |y-c|^{-2}
    are integrated with the s^2 Jacobian cancelling the singularity.
    `extra_break` optionally inserts a panel boundary at a given radius
    (used to resolve a density feature at a known distance).
    """
    c = np.asarray(center, dtype=float)
    w = np.asarray(inward, dtype=float)
    w = w / np.linalg.norm(w)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(helper, w)) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1p = np.cross(w, helper)
    e1p /= np.linalg.norm(e1p)
    e2p = np.cross(w, e1p)

    t, wt = _gauss_on_panels(np.linspace(0.0, 1.0, n_t + 1), 3)  # t = u.w in [0,1]
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    st = np.sqrt(np.maximum(1.0 - t ** 2, 0.0))
    u = (
        st[:, None, None] * (np.cos(phi)[None, :, None] * e1p + np.sin(phi)[None, :, None] * e2p)
        + t[:, None, None] * w
    )
    breaks = radius * dyadic_breaks(0.0, 1.0, level, toward="a")
    if extra_break is not None and 0 < extra_break < radius:
        breaks = np.unique(np.concatenate([breaks, [extra_break]]))
    s, ws = _gauss_on_panels(breaks, order)
    nodes = c[None, None, None, :] + s[None, None, :, None] * u[:, :, None, :]
    weights = wt[:, None, None] * wphi * (ws * s ** 2)[None, None, :]
    return QuadratureRule(
        nodes=nodes.reshape(-1, 3),
        weights=weights.ravel(),
        kind="half-ball-volume",
        grading_center=c,
        grading_levels=level,
    )
