"""Singularity-expansion recursion for synthetic smooth coefficient pairs.

Builds the first-order boundary/volume quadruple (phi_1, psi_1, Phi_1, Psi_1)
driven by a dipole pair, advances it one depth at a time through the coupled
recursion (boundary fields first, then the volume fields that consume them),
and measures difference norms between coefficient pairs agreeing to a given
order at the boundary.

All volume potentials are discrete sums over one fixed graded rule; boundary
operators go through the rotated-polar Nystrom assembler.  Everything is
linear in the densities, so constant coefficients reproduce the exact zero
fixed point at every depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    DomainDescriptor,
    QuadratureRule,
    SphereRule,
    make_sphere_quadrature,
    make_volume_quadrature,
    unit_ball,
)
from .kernels import MaterialConstants, maxwell_pair
from .potentials import (
    BoundaryOperatorAssembler,
    PotentialError,
    _chunked_pairs,
    surface_potential,
)
from .sobolev import SphereTransform, scalar_spectrum, tangential_spectrum

X0_MATCH_TOL = 1e-10


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientField:
    """Smooth (mu, gamma) pair with exact gradient oracles."""

    mu: Callable[[np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    grad_mu: Callable[[np.ndarray], np.ndarray]
    grad_gamma: Callable[[np.ndarray], np.ndarray]
    omega: float
    label: str = "coefficients"

    def constants_at(self, x0: np.ndarray) -> MaterialConstants:
        x0 = np.atleast_2d(x0)
        return MaterialConstants(
            mu0=complex(self.mu(x0)[0]),
            gamma0=complex(self.gamma(x0)[0]),
            omega=self.omega,
        )

    def validate(self, points: np.ndarray, fd_tol: float = 1e-8) -> None:
        """Positivity plus a finite-difference check of the gradient oracles."""
        for f in (self.mu, self.gamma):
            if np.any(np.abs(f(points)) <= 0):
                raise ExpansionError("coefficient vanishes at a node")
        h = 1e-6
        pts = points[: min(8, len(points))]
        for f, g in ((self.mu, self.grad_mu), (self.gamma, self.grad_gamma)):
            grad = g(pts)
            scale = max(1.0, float(np.max(np.abs(grad))))
            for ax in range(3):
                e = np.zeros(3)
                e[ax] = h
                fd = (f(pts + e) - f(pts - e)) / (2 * h)
                if np.max(np.abs(fd - grad[:, ax])) > fd_tol * scale:
                    raise ExpansionError("gradient oracle disagrees with differences")


def constant_coefficients(mu0=1.0, gamma0=1.0, omega=1.0) -> CoefficientField:
    def _c(v):
        return lambda p: np.full(np.atleast_2d(p).shape[0], v, dtype=complex)

    def _z(p):
        return np.zeros((np.atleast_2d(p).shape[0], 3), dtype=complex)

    return CoefficientField(_c(mu0), _c(gamma0), _z, _z, omega, "constant")


def linear_coefficients(mu0=1.0, gamma0=1.0, omega=1.0, beta_mu=0.0,
                        beta_gamma=0.0, direction=(1.0, 0.0, 0.0),
                        x0=(0.0, 0.0, 1.0), label=None) -> CoefficientField:
    """mu = mu0 (1 + beta_mu (x - x0).d), likewise gamma; gradients exact."""
    d = np.asarray(direction, dtype=float)
    x0 = np.asarray(x0, dtype=float)

    def make(c0, beta):
        def f(p):
            p = np.atleast_2d(p)
            return c0 * (1.0 + beta * (p - x0) @ d) + 0j

        def g(p):
            p = np.atleast_2d(p)
            return np.broadcast_to(c0 * beta * d, (p.shape[0], 3)).astype(complex)

        return f, g

    mu, gmu = make(mu0, beta_mu)
    ga, gga = make(gamma0, beta_gamma)
    return CoefficientField(mu, ga, gmu, gga, omega,
                            label or f"linear(bmu={beta_mu},bga={beta_gamma})")


def boundary_flattened_perturbation(base: CoefficientField, which: str,
                                    amplitude: complex, order: int,
                                    label=None) -> CoefficientField:
    """Add amplitude * w(x)^{order+1} to one coefficient, w = 1 - |x|^2.

    w vanishes on the unit sphere with nonvanishing gradient, so the modified
    field agrees with `base` to order `order` on the whole boundary.
    """
    p1 = order + 1

    def w(p):
        p = np.atleast_2d(p)
        return 1.0 - np.sum(p * p, axis=-1)

    def dw(p):
        p = np.atleast_2d(p)
        return -2.0 * p

    def f(p):
        return (base.mu if which == "mu" else base.gamma)(p) + amplitude * w(p) ** p1

    def g(p):
        gb = (base.grad_mu if which == "mu" else base.grad_gamma)(p)
        return gb + (amplitude * p1 * w(p) ** (p1 - 1))[:, None] * dw(p)

    if which == "mu":
        return replace(base, mu=f, grad_mu=g,
                       label=label or f"{base.label}+mu~w^{p1}")
    if which == "gamma":
        return replace(base, gamma=f, grad_gamma=g,
                       label=label or f"{base.label}+gamma~w^{p1}")
    raise ExpansionError("which must be 'mu' or 'gamma'")


# ---------------------------------------------------------------------------
# discretization bundle
# ---------------------------------------------------------------------------

@dataclass
class RecursionSetup:
    domain: DomainDescriptor
    volume_rule: QuadratureRule
    surface_rule: SphereRule
    assembler: BoundaryOperatorAssembler
    transform: SphereTransform
    L: int

    @staticmethod
    def default(L: int = 14, volume_level: int = 7, volume_order: int = 3,
                n_phi: int = 12) -> "RecursionSetup":
        domain = unit_ball()
        vol = make_volume_quadrature(domain, volume_level,
                                     singular_center=domain.x0,
                                     order=volume_order, n_phi=n_phi)
        surf = make_sphere_quadrature(L + 1)
        asm = BoundaryOperatorAssembler(surf, L)
        return RecursionSetup(domain, vol, surf, asm, asm.transform, L)

    @property
    def nu(self) -> np.ndarray:
        return self.surface_rule.normals()


@dataclass
class TermRecipe:
    """One linear potential term, re-evaluatable at arbitrary targets."""

    coef: complex
    op: str              # "vol-curl" | "vol-grad" | "vol-value" | "surf-grad" | "surf-curl"
    values: np.ndarray   # density samples on the carrier rule
    rule: QuadratureRule

    def evaluate(self, k: complex, targets: np.ndarray) -> np.ndarray:
        mode = {"vol-curl": "curl", "vol-grad": "grad", "vol-value": "value",
                "surf-grad": "grad", "surf-curl": "curl"}[self.op]
        out = _chunked_pairs(k, targets, self.rule.nodes, self.rule.weights,
                             self.values, mode, puncture=1e-12)
        return self.coef * out


@dataclass
class ExpansionState:
    depth: int
    delta: float
    flavor: str
    constants: MaterialConstants
    phi_b: np.ndarray            # (ns,)
    psi_b: np.ndarray            # (ns, 3), tangential
    Phi_v: np.ndarray            # (nv, 3)
    Psi_v: np.ndarray
    Phi_prev: np.ndarray         # depth m-1 history
    Psi_prev: np.ndarray
    Phi_terms: List[TermRecipe] = field(default_factory=list)
    Psi_terms: List[TermRecipe] = field(default_factory=list)

    def eval_Phi(self, targets: np.ndarray) -> np.ndarray:
        out = np.zeros((np.atleast_2d(targets).shape[0], 3), dtype=complex)
        for t in self.Phi_terms:
            out += t.evaluate(self.constants.k0, targets)
        return out

    def eval_Psi(self, targets: np.ndarray) -> np.ndarray:
        out = np.zeros((np.atleast_2d(targets).shape[0], 3), dtype=complex)
        for t in self.Psi_terms:
            out += t.evaluate(self.constants.k0, targets)
        return out


def _coeff_samples(coeffs: CoefficientField, setup: RecursionSetup):
    vn = setup.volume_rule.nodes
    sn = setup.surface_rule.nodes
    return dict(
        mu_v=coeffs.mu(vn), ga_v=coeffs.gamma(vn),
        gmu_v=coeffs.grad_mu(vn), gga_v=coeffs.grad_gamma(vn),
        mu_s=coeffs.mu(sn),
    )


def first_order(coeffs: CoefficientField, delta: float, setup: RecursionSetup,
                flavor: str = "unprimed",
                anchor: Optional[MaterialConstants] = None,
                allow_mismatch: bool = False) -> ExpansionState:
    """The m = 1 quadruple for one delta and one coefficient pair."""
    own = coeffs.constants_at(setup.domain.x0)
    constants = anchor or own
    if not allow_mismatch:
        if (abs(constants.mu0 - own.mu0) > X0_MATCH_TOL
                or abs(constants.gamma0 - own.gamma0) > X0_MATCH_TOL):
            raise ExpansionError(
                "anchor constants disagree with the coefficients at x0")
    k0 = constants.k0
    omega = constants.omega
    E, H = maxwell_pair(flavor, delta, constants, setup.domain)

    s = _coeff_samples(coeffs, setup)
    vn, vw = setup.volume_rule.nodes, setup.volume_rule.weights
    sn = setup.surface_rule.nodes
    nu = setup.nu

    E_v, H_v = E.eval(vn), H.eval(vn)
    H_s = H.eval(sn)

    rho_a = (s["ga_v"] * (s["mu_v"] - constants.mu0))[:, None] * H_v
    rho_b = np.sum(s["gga_v"] * E_v, axis=-1)
    rho_c = (s["mu_v"] * (s["ga_v"] - constants.gamma0))[:, None] * E_v
    rho_d = np.sum(s["gmu_v"] * H_v, axis=-1)
    g_s = (s["mu_s"] - constants.mu0) * np.sum(nu * H_s, axis=-1)

    def vol(values, mode, targets):
        return _chunked_pairs(k0, targets, vn, vw, values, mode, puncture=1e-12)

    # boundary scalars / tangential fields
    phi1 = (2j * omega * np.sum(nu * vol(rho_a, "curl", sn), axis=-1)
            + 2.0 * np.sum(nu * vol(rho_b, "grad", sn), axis=-1))
    psi1 = (-2j * omega * np.cross(nu, vol(rho_c, "curl", sn))
            + 2.0 * np.cross(nu, vol(rho_d, "grad", sn))
            - 2.0 * setup.assembler.grad_single_layer_tangential(k0, g_s))

    # volume fields
    Phi1 = 1j * omega * vol(rho_a, "curl", vn) + vol(rho_b, "grad", vn)
    Psi1 = (-1j * omega * vol(rho_c, "curl", vn) + vol(rho_d, "grad", vn)
            - surface_potential(k0, setup.surface_rule, g_s, vn, "grad"))

    zeros = np.zeros_like(Phi1)
    Phi_terms = [
        TermRecipe(1j * omega, "vol-curl", rho_a, setup.volume_rule),
        TermRecipe(1.0, "vol-grad", rho_b, setup.volume_rule),
    ]
    Psi_terms = [
        TermRecipe(-1j * omega, "vol-curl", rho_c, setup.volume_rule),
        TermRecipe(1.0, "vol-grad", rho_d, setup.volume_rule),
        TermRecipe(-1.0, "surf-grad", g_s, setup.surface_rule),
    ]
    return ExpansionState(
        depth=1, delta=delta, flavor=flavor, constants=constants,
        phi_b=phi1, psi_b=psi1, Phi_v=Phi1, Psi_v=Psi1,
        Phi_prev=zeros, Psi_prev=zeros.copy(),
        Phi_terms=Phi_terms, Psi_terms=Psi_terms,
    )


def step(state: ExpansionState, coeffs: CoefficientField,
         first: ExpansionState, setup: RecursionSetup) -> ExpansionState:
    """Advance the quadruple from depth m to m+1.

    The boundary fields phi_{m+1}, psi_{m+1} are assembled before the volume
    fields, which consume them through the surface-potential closing terms.
    """
    if state.depth < 1:
        raise ExpansionError("step needs a state of depth >= 1")
    if (first.delta != state.delta or first.flavor != state.flavor):
        raise ExpansionError("first-order state does not match")
    tang = np.abs(np.sum(state.psi_b * setup.nu, axis=-1))
    scale = max(float(np.max(np.abs(state.psi_b))), 1e-300)
    if np.max(tang) > 1e-8 * max(1.0, scale):
        raise ExpansionError("psi_m lost tangentiality")

    constants = state.constants
    k0, omega = constants.k0, constants.omega
    s = _coeff_samples(coeffs, setup)
    vn, vw = setup.volume_rule.nodes, setup.volume_rule.weights
    sn = setup.surface_rule.nodes
    nu = setup.nu

    dlog_ga = s["gga_v"] / s["ga_v"][:, None]
    dlog_mu = s["gmu_v"] / s["mu_v"][:, None]
    d1 = np.cross(dlog_ga, state.Phi_v)           # grad log gamma x Phi_m
    d2 = s["ga_v"][:, None] * state.Psi_v         # gamma Psi_m
    d3 = np.cross(dlog_mu, state.Psi_v)           # grad log mu x Psi_m
    d4 = s["mu_v"][:, None] * state.Phi_v         # mu Phi_m

    def vol(values, mode, targets):
        return _chunked_pairs(k0, targets, vn, vw, values, mode, puncture=1e-12)

    phi_next = (2.0 * np.sum(nu * vol(d1, "curl", sn), axis=-1)
                + 2j * omega * np.sum(nu * vol(d2, "curl", sn), axis=-1)
                - 2.0 * k0 ** 2 * np.sum(nu * vol(state.Phi_prev, "value", sn), axis=-1)
                + 2.0 * setup.assembler.adjoint_double_layer(k0, state.phi_b)
                + first.phi_b)
    psi_next = (2.0 * np.cross(nu, vol(d3, "curl", sn))
                - 2j * omega * np.cross(nu, vol(d4, "curl", sn))
                - 2.0 * k0 ** 2 * np.cross(nu, vol(state.Psi_prev, "value", sn))
                - 2.0 * setup.assembler.magnetic_dipole(k0, state.psi_b)
                + first.psi_b)

    Phi_next = (vol(d1, "curl", vn) + 1j * omega * vol(d2, "curl", vn)
                - k0 ** 2 * vol(state.Phi_prev, "value", vn)
                + surface_potential(k0, setup.surface_rule, phi_next, vn, "grad")
                + first.Phi_v)
    Psi_next = (vol(d3, "curl", vn) - 1j * omega * vol(d4, "curl", vn)
                - k0 ** 2 * vol(state.Psi_prev, "value", vn)
                - surface_potential(k0, setup.surface_rule, psi_next, vn, "curl")
                + first.Psi_v)

    Phi_terms = [
        TermRecipe(1.0, "vol-curl", d1, setup.volume_rule),
        TermRecipe(1j * omega, "vol-curl", d2, setup.volume_rule),
        TermRecipe(-k0 ** 2, "vol-value", state.Phi_prev.copy(), setup.volume_rule),
        TermRecipe(1.0, "surf-grad", phi_next, setup.surface_rule),
    ] + first.Phi_terms
    Psi_terms = [
        TermRecipe(1.0, "vol-curl", d3, setup.volume_rule),
        TermRecipe(-1j * omega, "vol-curl", d4, setup.volume_rule),
        TermRecipe(-k0 ** 2, "vol-value", state.Psi_prev.copy(), setup.volume_rule),
        TermRecipe(-1.0, "surf-curl", psi_next, setup.surface_rule),
    ] + first.Psi_terms

    return ExpansionState(
        depth=state.depth + 1, delta=state.delta, flavor=state.flavor,
        constants=constants,
        phi_b=phi_next, psi_b=psi_next, Phi_v=Phi_next, Psi_v=Psi_next,
        Phi_prev=state.Phi_v, Psi_prev=state.Psi_v,
        Phi_terms=Phi_terms, Psi_terms=Psi_terms,
    )


def boundary_norms(state: ExpansionState, setup: RecursionSetup,
                   s: float = 0.5) -> Tuple[float, float]:
    """(||phi_m||_{H^s}, ||psi_m||_{H^s_t}) spectral norms."""
    sp = scalar_spectrum(state.phi_b, setup.surface_rule, setup.L, setup.transform)
    tp = tangential_spectrum(state.psi_b, setup.surface_rule, setup.L,
                             setup.transform)
    return sp.norm(s), tp.norm(s)


def offpatch_norm(state: ExpansionState, setup: RecursionSetup,
                  eps: float = 0.5, s: Optional[float] = None) -> float:
    """Spectral norm of phi_m damped by a cutoff vanishing near x0 (surrogate
    for the H^{m+1/2} norm away from the singular patch)."""
    if s is None:
        s = state.depth + 0.5
    x0 = setup.domain.x0
    dist = np.linalg.norm(setup.surface_rule.nodes - x0, axis=-1)
    t = np.clip((dist - eps / 2) / (eps / 2), 0.0, 1.0)
    cut = t * t * (3.0 - 2.0 * t)
    sp = scalar_spectrum(state.phi_b * cut, setup.surface_rule, setup.L,
                         setup.transform)
    return sp.norm(s)


# ---------------------------------------------------------------------------
# finite-difference volume Sobolev surrogate
# ---------------------------------------------------------------------------

def _fd_norm_on_grid(values: np.ndarray, inside: np.ndarray, h: float,
                     orders: int) -> float:
    """Quadrature H^orders norm of a (possibly vector) field on a cube grid.

    `values` has shape grid + (3,) or grid; differencing shrinks the interior
    mask by one cell per order.
    """
    total = 0.0
    fields = [values]
    mask = inside.copy()
    for _ in range(orders + 1):
        msum = 0.0
        for f in fields:
            msum += float(np.sum(np.abs(f[mask]) ** 2))
        total += msum * h ** 3
        nxt = []
        for f in fields:
            for ax in range(3):
                nxt.append((np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h))
        fields = nxt
        shrink = np.ones_like(mask)
        for ax in range(3):
            shrink &= np.roll(mask, 1, axis=ax) & np.roll(mask, -1, axis=ax)
        mask = shrink & mask
        if not np.any(mask):
            break
    return float(np.sqrt(total))


def volume_h_surrogate(evaluate: Callable[[np.ndarray], np.ndarray], l_plus_1: int,
                       h: float = 0.18, zoom_center: Optional[np.ndarray] = None,
                       zoom_h: Optional[float] = None, zoom_extent: float = 0.0,
                       radius: float = 1.0) -> float:
    """H^{l+1}(Omega) surrogate: FD-derivative quadrature norms on a uniform
    interior grid, optionally augmented by a fine grid around a boundary point
    so delta-scale structure near x0 is resolved."""
    def grid_norm(center, spacing, half):
        n = int(np.floor(2 * half / spacing)) + 1
        xs = [center[i] + spacing * (np.arange(n) - (n - 1) / 2) for i in range(3)]
        X = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1)
        pts = X.reshape(-1, 3)
        r = np.linalg.norm(pts, axis=-1)
        inside = (r <= radius - 1.5 * spacing).reshape(X.shape[:3])
        if not np.any(inside):
            return 0.0
        vals = np.zeros((pts.shape[0], 3), dtype=complex)
        sel = inside.ravel()
        vals[sel] = evaluate(pts[sel])
        vals = vals.reshape(X.shape[:3] + (3,))
        return _fd_norm_on_grid(vals, inside, spacing, l_plus_1) ** 2

    total = grid_norm(np.zeros(3), h, 1.0)
    if zoom_center is not None and zoom_h is not None and zoom_extent > 0:
        c = np.asarray(zoom_center, dtype=float)
        c = c * (1.0 - (zoom_extent / 2 + 2 * zoom_h))   # pull inside the ball
        total += grid_norm(c, zoom_h, zoom_extent)
    return float(np.sqrt(total))


def _boundary_agreement_violated(fa: CoefficientField, fb: CoefficientField,
                                 setup: RecursionSetup, order: int) -> bool:
    sn = setup.surface_rule.nodes
    for a, b in ((fa.mu, fb.mu), (fa.gamma, fb.gamma)):
        if np.max(np.abs(a(sn) - b(sn))) > 1e-9:
            return True
    if order >= 1:
        for a, b in ((fa.grad_mu, fb.grad_mu), (fa.grad_gamma, fb.grad_gamma)):
            if np.max(np.abs(a(sn) - b(sn))) > 1e-9:
                return True
    return False


def pair_difference_norms(coeffs_a: CoefficientField, coeffs_b: CoefficientField,
                          q_a, q_b, l: int, depth: int,
                          deltas: Sequence[float], setup: RecursionSetup,
                          force_shared_anchor: bool = False,
                          grid_h: float = 0.18):
    """Sweep of ||q_a Phi^{(a)}_{m,delta} - q_b Phi^{(b)}_{m,delta}|| and the
    Psi analog in the H^{l+1} surrogate norm.

    The two pairs must agree to order l on the boundary; passing
    `force_shared_anchor` instead evaluates pair B against pair A's base-point
    constants, the deliberate hypothesis violation that exposes the blow-up
    mechanism.
    """
    if _boundary_agreement_violated(coeffs_a, coeffs_b, setup, l) and not force_shared_anchor:
        raise ExpansionError("coefficient pairs do not agree to the stated order")
    anchor = coeffs_a.constants_at(setup.domain.x0)
    rows = []
    for delta in deltas:
        fo_a = first_order(coeffs_a, delta, setup)
        fo_b = first_order(coeffs_b, delta, setup, anchor=anchor,
                           allow_mismatch=force_shared_anchor)
        st_a, st_b = fo_a, fo_b
        for _ in range(depth - 1):
            st_a = step(st_a, coeffs_a, fo_a, setup)
            st_b = step(st_b, coeffs_b, fo_b, setup)

        def diff_Phi(pts, sa=st_a, sb=st_b):
            return (q_a(pts)[:, None] * sa.eval_Phi(pts)
                    - q_b(pts)[:, None] * sb.eval_Phi(pts))

        def diff_Psi(pts, sa=st_a, sb=st_b):
            return (q_a(pts)[:, None] * sa.eval_Psi(pts)
                    - q_b(pts)[:, None] * sb.eval_Psi(pts))

        nPhi = volume_h_surrogate(diff_Phi, l + 1, h=grid_h,
                                  zoom_center=setup.domain.x0,
                                  zoom_h=delta / 2, zoom_extent=4 * delta)
        nPsi = volume_h_surrogate(diff_Psi, l + 1, h=grid_h,
                                  zoom_center=setup.domain.x0,
                                  zoom_h=delta / 2, zoom_extent=4 * delta)
        rows.append((delta, nPhi, nPsi))
    return rows
