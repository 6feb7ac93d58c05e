"""Construction, validation, and sampling of thin-shell initial data.

Two families are supported, both describing a thin spherical shell of
nearly radially infalling particles centered at radius a0 with inward
velocity scale a1 < 0 and thinness parameter eps:

* the small-density family: charge density bounded above by the
  homogeneous-ball value 3/(4 pi a0^3), with equality on the inner half
  of the shell;
* the fixed-mass family: same support geometry, but normalized to a
  prescribed total mass instead of the density bound.

The concrete data are built from a compactly supported velocity profile
H and a radial cutoff phi as f0 = H_eps(|a1 x - a0 v|^2) phi(|x|), which
in reduced coordinates reads H_eps((a1 r - a0 w)^2 + a0^2 l / r^2) phi(r).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .phase_space import REDUCED_MEASURE, Ensemble

# Value of the 3-space integral of H(|u|^2); fixes the homogeneous-ball
# density 3/(4 pi a0^3) after the velocity shift by (a1/a0) x.
PROFILE_NORMALIZATION = 3.0 / (4.0 * np.pi)


class EmptyEnsembleError(ValueError):
    """Raised when sampling places no shell inside the support."""


@dataclass(frozen=True)
class ClassSpec:
    """Parameters of an initial-data family.

    target_mass present selects the fixed-mass family; absent selects the
    small-density family.  delta_r and delta_w are derived: delta_r = eps^3
    and delta_w = (|a1| delta_r + eps) / a0, the half-widths of the radial
    shell and of the velocity window that the support conditions imply.
    """

    a0: float
    a1: float
    eps: float
    target_mass: Optional[float] = None
    delta_r: float = field(init=False)
    delta_w: float = field(init=False)

    def __post_init__(self):
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if not self.a1 < 0:
            raise ValueError(f"a1 must be negative, got {self.a1}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.target_mass is not None and not self.target_mass > 0:
            raise ValueError(f"target_mass must be positive, got {self.target_mass}")
        object.__setattr__(self, "delta_r", self.eps**3)
        object.__setattr__(
            self, "delta_w", (abs(self.a1) * self.delta_r + self.eps) / self.a0
        )

    @property
    def is_fixed_mass(self) -> bool:
        return self.target_mass is not None


@dataclass(frozen=True)
class ProfileH:
    """Velocity profile H: [0, inf) -> [0, inf).

    Vanishes for s > support_bound and integrates to 3/(4 pi) over
    3-space as H(|u|^2).
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_bound: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("profile argument must be nonnegative")
        out = self.evaluator(s)
        return float(out) if out.ndim == 0 else out

    def space_integral(self) -> float:
        """4 pi * integral of H(u^2) u^2 du, for normalization checks."""
        u_max = np.sqrt(self.support_bound)
        val, _ = quad(lambda u: self(u * u) * u * u, 0.0, u_max, limit=200)
        return 4.0 * np.pi * val


@lru_cache(maxsize=1)
def _bump_constant() -> float:
    # c such that 4 pi * c * int_0^1 exp(-1/(1-u^2)) u^2 du = 3/(4 pi)
    integral, _ = quad(lambda u: np.exp(-1.0 / (1.0 - u * u)) * u * u, 0.0, 1.0)
    return PROFILE_NORMALIZATION / (4.0 * np.pi * integral)


def bump_profile() -> ProfileH:
    """The default profile: a smooth bump c exp(-1/(1-s)) on [0, 1).

    c is fixed once by quadrature so the 3-space normalization holds.
    """
    c = _bump_constant()

    def evaluator(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = s < 1.0
        out[inside] = c * np.exp(-1.0 / (1.0 - s[inside]))
        return out

    return ProfileH(evaluator=evaluator, support_bound=1.0)


def rescale_profile(profile: ProfileH, eps: float) -> ProfileH:
    """Squeeze a profile to velocity scale eps: s -> profile(s/eps^2)/eps^3.

    The 3-space normalization is invariant under this rescaling; the
    support bound shrinks by eps^2.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    inv_eps2 = 1.0 / (eps * eps)
    inv_eps3 = 1.0 / (eps * eps * eps)

    def evaluator(s: np.ndarray) -> np.ndarray:
        return inv_eps3 * profile.evaluator(np.asarray(s, dtype=float) * inv_eps2)

    return ProfileH(evaluator=evaluator, support_bound=profile.support_bound * eps * eps)


def _smooth_rise(t: np.ndarray) -> np.ndarray:
    # C-infinity step: 0 for t <= 0, 1 for t >= 1.
    t = np.asarray(t, dtype=float)
    g_up = np.zeros_like(t)
    g_dn = np.zeros_like(t)
    pos = t > 0.0
    g_up[pos] = np.exp(-1.0 / t[pos])
    neg = t < 1.0
    g_dn[neg] = np.exp(-1.0 / (1.0 - t[neg]))
    return g_up / (g_up + g_dn)


@dataclass(frozen=True)
class CutoffPhi:
    """Smooth radial cutoff: 0 outside [a0 - delta_r, a0 + delta_r],
    1 on the inner half-width plateau, values in [0, 1]."""

    a0: float
    delta_r: float
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.evaluator(r)
        return float(out) if out.ndim == 0 else out


def smooth_cutoff(a0: float, delta_r: float) -> CutoffPhi:
    """Build the canonical cutoff from the smooth step.

    Rises from 0 at a0 - delta_r to 1 at a0 - delta_r/2, mirrored on the
    right; exactly 1 on the closed plateau [a0 - delta_r/2, a0 + delta_r/2].
    """
    if not (a0 > 0 and delta_r > 0):
        raise ValueError("a0 and delta_r must be positive")
    half = 0.5 * delta_r

    def evaluator(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        left = _smooth_rise((r - (a0 - delta_r)) / half)
        right = _smooth_rise(((a0 + delta_r) - r) / half)
        return np.where(r < a0, left, right)

    return CutoffPhi(a0=a0, delta_r=delta_r, evaluator=evaluator)


@dataclass(frozen=True)
class DerivedBounds:
    """Quantities implied by the support conditions.

    ell_max(r) = (r/a0)^2 eps^2 bounds the squared angular momentum at
    radius r.  For the small-density family the mass sandwich
    [3 eps^3/a0, 8 eps^3/a0] brackets the total mass; for the fixed-mass
    family both ends equal the prescribed mass.
    """

    delta_w: float
    ell_coefficient: float
    mass_lower: float
    mass_upper: float

    def ell_max(self, r):
        return self.ell_coefficient * np.square(r)


def derived_bounds(spec: ClassSpec) -> DerivedBounds:
    coeff = (spec.eps / spec.a0) ** 2
    if spec.is_fixed_mass:
        lo = hi = spec.target_mass
    else:
        lo = 3.0 * spec.eps**3 / spec.a0
        hi = 8.0 * spec.eps**3 / spec.a0
    return DerivedBounds(
        delta_w=spec.delta_w, ell_coefficient=coeff, mass_lower=lo, mass_upper=hi
    )


@dataclass(frozen=True)
class InitialData:
    """A concrete initial distribution: spec + rescaled profile + cutoff.

    scale is 1 for the small-density family and target_mass/||f0||_1 for
    the fixed-mass family, so evaluate() returns the final density.
    """

    spec: ClassSpec
    profile: ProfileH  # already rescaled to velocity width eps
    cutoff: CutoffPhi
    scale: float = 1.0

    @classmethod
    def from_spec(
        cls, spec: ClassSpec, base_profile: Optional[ProfileH] = None
    ) -> "InitialData":
        base = base_profile if base_profile is not None else bump_profile()
        profile = rescale_profile(base, spec.eps)
        cutoff = smooth_cutoff(spec.a0, spec.delta_r)
        data = cls(spec=spec, profile=profile, cutoff=cutoff, scale=1.0)
        if spec.is_fixed_mass:
            data = replace(data, scale=spec.target_mass / data.l1_norm())
        return data

    def evaluate_reduced(self, r, w, ell):
        """f0 at reduced coordinates (r, w, ell); r > 0 required."""
        r = np.asarray(r, dtype=float)
        w = np.asarray(w, dtype=float)
        ell = np.asarray(ell, dtype=float)
        if np.any(r <= 0):
            raise ValueError("radius must be positive")
        if np.any(ell < 0):
            raise ValueError("squared angular momentum must be nonnegative")
        spec = self.spec
        s = (spec.a1 * r - spec.a0 * w) ** 2 + spec.a0**2 * ell / r**2
        out = self.scale * self.profile.evaluator(s) * self.cutoff.evaluator(r)
        return float(out) if out.ndim == 0 else out

    def evaluate(self, x, v) -> float:
        """f0 at a Cartesian (position, velocity) pair; |x| > 0 required."""
        from .phase_space import to_radial

        c = to_radial(x, v)
        return float(self.evaluate_reduced(c.r, c.w, c.ell))

    def support_box(self):
        """Bounding box of the support in (r, w, ell).

        The w interval (a1 - delta_w, a1 + delta_w) is the exact hull of
        the support over the radial shell; the ell bound is the maximum
        of ell_max(r) over the shell.
        """
        spec = self.spec
        r_lo = spec.a0 - spec.delta_r
        r_hi = spec.a0 + spec.delta_r
        w_lo = spec.a1 - spec.delta_w
        w_hi = spec.a1 + spec.delta_w
        ell_hi = (r_hi / spec.a0) ** 2 * self.profile.support_bound
        return r_lo, r_hi, w_lo, w_hi, ell_hi

    def rho0(self, r, n_quad: int = 64):
        """Initial charge density by quadrature of the (w, ell) marginal:
        rho(r) = (pi / r^2) * double integral of f0 over w and ell."""
        scalar = np.isscalar(r) or np.ndim(r) == 0
        radii = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(radii <= 0):
            raise ValueError("radius must be positive")
        spec = self.spec
        s_max = self.profile.support_bound
        e = np.sqrt(s_max)
        nodes, wts = leggauss(n_quad)
        vals = np.zeros_like(radii)
        for i, ri in enumerate(radii):
            phi_r = float(self.cutoff(ri))
            if phi_r == 0.0:
                continue
            # f0 > 0 needs (a1 r - a0 w)^2 < s_max, an interval in w
            w_center = spec.a1 * ri / spec.a0
            w_half = e / spec.a0
            w_nodes = w_center + w_half * nodes
            w_weights = w_half * wts
            s1 = (spec.a1 * ri - spec.a0 * w_nodes) ** 2
            ell_top = ri**2 * np.clip(s_max - s1, 0.0, None) / spec.a0**2
            # tensor grid: rows are w nodes, columns are ell nodes on [0, top]
            ell_nodes = 0.5 * ell_top[:, None] * (nodes[None, :] + 1.0)
            ell_weights = 0.5 * ell_top[:, None] * wts[None, :]
            s_grid = s1[:, None] + spec.a0**2 * ell_nodes / ri**2
            f_grid = self.scale * self.profile.evaluator(s_grid) * phi_r
            inner = np.sum(f_grid * ell_weights, axis=1)
            vals[i] = np.pi / ri**2 * np.sum(inner * w_weights)
        return float(vals[0]) if scalar else vals

    def l1_norm(self, n_quad: int = 64) -> float:
        """Total mass of the current evaluator: 4 pi * int rho0(r) r^2 dr.

        Integrates piecewise between the cutoff breakpoints (support
        edges and plateau edges) where the integrand is smooth.
        """
        spec = self.spec
        pts = [
            spec.a0 - spec.delta_r,
            spec.a0 - 0.5 * spec.delta_r,
            spec.a0 + 0.5 * spec.delta_r,
            spec.a0 + spec.delta_r,
        ]
        nodes, wts = leggauss(n_quad)
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            radii = mid + half * nodes
            total += half * float(np.sum(wts * self.rho0(radii, n_quad) * radii**2))
        return 4.0 * np.pi * total


def sample_ensemble(
    data: InitialData, n_r: int, n_w: int, n_ell: int
) -> Ensemble:
    """Discretize f0 into shells on a midpoint tensor grid in (r, w, ell).

    Shell weight = 4 pi^2 f0 dr dw dl per occupied cell, which makes the
    weight sum the midpoint quadrature of the total mass.  Cells with
    zero density are dropped; ids follow the (r, w, ell) grid order.  For
    the fixed-mass family the weights are rescaled so the sum equals the
    target exactly (same-quadrature normalization, no mass drift).
    """
    if min(n_r, n_w, n_ell) < 2:
        raise ValueError("need at least 2 grid points per axis")
    r_lo, r_hi, w_lo, w_hi, ell_hi = data.support_box()
    dr = (r_hi - r_lo) / n_r
    dw = (w_hi - w_lo) / n_w
    dl = ell_hi / n_ell
    r_mid = r_lo + dr * (np.arange(n_r) + 0.5)
    w_mid = w_lo + dw * (np.arange(n_w) + 0.5)
    ell_mid = dl * (np.arange(n_ell) + 0.5)  # strictly positive: no ell = 0 shell
    rr, ww, ll = np.meshgrid(r_mid, w_mid, ell_mid, indexing="ij")
    f_vals = data.evaluate_reduced(rr.ravel(), ww.ravel(), ll.ravel())
    keep = f_vals > 0.0
    if not np.any(keep):
        raise EmptyEnsembleError(
            "no shell fell inside the support; refine the sampling grid"
        )
    weight = REDUCED_MEASURE * f_vals[keep] * dr * dw * dl
    if data.spec.is_fixed_mass:
        weight = weight * (data.spec.target_mass / float(np.sum(weight)))
    return Ensemble(
        r=rr.ravel()[keep],
        w=ww.ravel()[keep],
        ell=ll.ravel()[keep],
        weight=weight,
        ids=np.flatnonzero(keep).astype(np.int64),
        time=0.0,
    )


@dataclass(frozen=True)
class MembershipCheck:
    """Outcome of a single membership condition.

    hard distinguishes structural conditions (strict support inequalities,
    the mass sandwich) from quadrature-tolerance comparisons.
    """

    name: str
    passed: bool
    hard: bool
    detail: str
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class MembershipReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else ("FAIL" if c.hard else "miss")
            lines.append(f"[{status}] {c.name}: {c.detail}")
        return "\n".join(lines)


def _worst_shell(ensemble: Ensemble, margin: np.ndarray):
    i = int(np.argmin(margin))
    return (
        int(ensemble.ids[i]),
        float(ensemble.r[i]),
        float(ensemble.w[i]),
        float(ensemble.ell[i]),
    )


def check_membership(
    data: InitialData,
    ensemble: Ensemble,
    rho_rel_tol: float = 1e-6,
    mass_rel_tol: float = 1e-12,
    n_rho_samples: int = 33,
) -> MembershipReport:
    """Validate an ensemble and its generating data against the family
    conditions.

    Per-shell support conditions are checked on the ensemble; the density
    conditions are checked on the continuum f0 by quadrature at sampled
    radii.  The density bound and plateau equality apply to the
    small-density family; the fixed-mass family instead requires the
    weight sum to equal the target mass.
    """
    spec = data.spec
    checks = []
    r, w, ell = ensemble.r, ensemble.w, ensemble.ell

    # support ellipse: (r + (a0/|a1|) w)^2 + l r^-2 (a0/a1)^2 < eps^2/a1^2
    lhs = (r + spec.a0 / abs(spec.a1) * w) ** 2 + ell / r**2 * (spec.a0 / spec.a1) ** 2
    rhs = spec.eps**2 / spec.a1**2
    margin = rhs - lhs
    ok = bool(np.all(margin > 0))
    checks.append(
        MembershipCheck(
            name="support-ellipse",
            passed=ok,
            hard=True,
            detail=f"min margin {float(np.min(margin)):.3e} (must be > 0)",
            witness=None if ok else _worst_shell(ensemble, margin),
        )
    )

    # radial shell: a0 - delta_r < r < a0 + delta_r
    margin = np.minimum(r - (spec.a0 - spec.delta_r), (spec.a0 + spec.delta_r) - r)
    ok = bool(np.all(margin > 0))
    checks.append(
        MembershipCheck(
            name="radial-shell",
            passed=ok,
            hard=True,
            detail=f"min distance to shell edge {float(np.min(margin)):.3e}",
            witness=None if ok else _worst_shell(ensemble, margin),
        )
    )

    # velocity window: w in (a1 - delta_w, a1 + delta_w)
    margin = np.minimum(w - (spec.a1 - spec.delta_w), (spec.a1 + spec.delta_w) - w)
    ok = bool(np.all(margin > 0))
    checks.append(
        MembershipCheck(
            name="velocity-window",
            passed=ok,
            hard=True,
            detail=f"min distance to window edge {float(np.min(margin)):.3e}",
            witness=None if ok else _worst_shell(ensemble, margin),
        )
    )

    # angular momentum bound: ell < (r/a0)^2 eps^2
    margin = (r / spec.a0) ** 2 * spec.eps**2 - ell
    ok = bool(np.all(margin > 0))
    checks.append(
        MembershipCheck(
            name="ell-bound",
            passed=ok,
            hard=True,
            detail=f"min margin {float(np.min(margin)):.3e}",
            witness=None if ok else _worst_shell(ensemble, margin),
        )
    )

    rho_cap = 3.0 / (4.0 * np.pi * spec.a0**3)
    if not spec.is_fixed_mass:
        # density bound everywhere (sampled across the shell and just outside)
        radii = np.linspace(
            spec.a0 - 1.5 * spec.delta_r, spec.a0 + 1.5 * spec.delta_r, n_rho_samples
        )
        rho = data.rho0(radii)
        worst = float(np.max(rho)) / rho_cap
        ok = worst <= 1.0 + rho_rel_tol
        checks.append(
            MembershipCheck(
                name="density-bound",
                passed=ok,
                hard=False,
                detail=f"max rho0 / cap = {worst:.12f} (tol {rho_rel_tol:g})",
                witness=None if ok else (float(radii[int(np.argmax(rho))]),),
            )
        )

        # plateau equality on [a0 - delta_r/2, a0 + delta_r/2]
        plateau = np.linspace(
            spec.a0 - 0.5 * spec.delta_r, spec.a0 + 0.5 * spec.delta_r, n_rho_samples
        )
        rho_p = data.rho0(plateau)
        rel_err = float(np.max(np.abs(rho_p / rho_cap - 1.0)))
        ok = rel_err <= rho_rel_tol
        checks.append(
            MembershipCheck(
                name="density-plateau",
                passed=ok,
                hard=False,
                detail=f"max relative deviation {rel_err:.3e} (tol {rho_rel_tol:g})",
                witness=None if ok else (float(plateau[int(np.argmax(np.abs(rho_p / rho_cap - 1.0)))]),),
            )
        )

        # mass sandwich 3 eps^3/a0 <= M <= 8 eps^3/a0
        db = derived_bounds(spec)
        m = ensemble.total_mass
        ok = db.mass_lower <= m <= db.mass_upper
        checks.append(
            MembershipCheck(
                name="mass-sandwich",
                passed=ok,
                hard=True,
                detail=f"mass {m:.6e} in [{db.mass_lower:.6e}, {db.mass_upper:.6e}]",
            )
        )
    else:
        m = ensemble.total_mass
        rel = abs(m / spec.target_mass - 1.0)
        ok = rel <= mass_rel_tol
        checks.append(
            MembershipCheck(
                name="total-mass",
                passed=ok,
                hard=False,
                detail=f"mass {m!r} vs target {spec.target_mass!r}, rel err {rel:.3e}",
            )
        )

    return MembershipReport(checks=tuple(checks))
