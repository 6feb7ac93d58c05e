"""Closed-form bounds on infalling trajectories and sup norms.

Three facts about any y(t) with y(0) = y0 > 0, y'(0) = y1 < 0 and
0 <= y'' - L y^-3 <= P y^-2 (L > 0, P >= 0):

* turning_point_bound: y has a unique turning time T0, the radius there
  is at most y_star = y0 sqrt((L + P y0) / (y0^2 y1^2 + L + P y0)), and
  T0 >= (y0 - y_star)/|y1|.
* infall_envelope: up to the turning time,
  y(t)^2 <= (y0 + y1 t)^2 + (L/y0^2 + P/y0) t^2; the parabola's minimum
  equals y_star^2, and for P = 0 the inequality is an equality.
* confinement_lower_bounds: if all mass M sits inside radius B, then
  the density sup is at least 3M/(4 pi B^3) and the field sup at least
  M/B^2 (uniform-ball saturation).

These are implemented as total formulas with hypothesis checks at the
boundary so they can serve both as predictions and as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TurningBound:
    """Upper bound on the minimum radius and lower bound on its time."""

    y_star: float
    t0_lower: float


@dataclass(frozen=True)
class SupNormBound:
    """Density/field sup-norm lower bounds from mass confinement."""

    rho_lower: float
    e_lower: float
    b_used: float


def _check_hypotheses(L: float, P: float, y0: float, y1: float):
    if not L > 0:
        raise ValueError(f"need L > 0 (shells without angular momentum are excluded), got {L}")
    if P < 0:
        raise ValueError(f"need P >= 0, got {P}")
    if not y0 > 0:
        raise ValueError(f"need y0 > 0, got {y0}")
    if not y1 < 0:
        raise ValueError(f"need y1 < 0 (inward start), got {y1}")


def turning_point_bound(L: float, P: float, y0: float, y1: float) -> TurningBound:
    """Minimum-radius bound y_star and turning-time lower bound.

    y_star < y0 always, and y_star -> 0 as y1 -> -infinity: a faster
    inward start penetrates deeper before the centrifugal and field
    terms turn it around.
    """
    _check_hypotheses(L, P, y0, y1)
    q = L + P * y0
    y_star = y0 * np.sqrt(q / (y0**2 * y1**2 + q))
    return TurningBound(y_star=float(y_star), t0_lower=float((y0 - y_star) / abs(y1)))


def infall_envelope(L: float, P: float, y0: float, y1: float, t):
    """Parabolic upper bound on y(t)^2, valid up to the turning time."""
    _check_hypotheses(L, P, y0, y1)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("envelope times must be nonnegative")
    out = (y0 + y1 * t) ** 2 + (L / y0**2 + P / y0) * t**2
    return float(out) if out.ndim == 0 else out


def envelope_minimum(L: float, P: float, y0: float, y1: float):
    """Argmin and minimum of the envelope parabola.

    The minimum value equals turning_point_bound(...).y_star ** 2, which
    ties the two bounds together; tests assert this identity.
    """
    _check_hypotheses(L, P, y0, y1)
    c = L / y0**2 + P / y0
    t_min = -y1 * y0 / (y1**2 + c)
    return float(t_min), float(infall_envelope(L, P, y0, y1, t_min))


def confinement_lower_bounds(M: float, B: float) -> SupNormBound:
    """Sup-norm lower bounds when mass M is confined inside radius B.

    Both are attained by the uniform ball / single-shell configuration,
    so the field solver's exact sup saturates e_lower bit for bit.
    """
    if not M > 0:
        raise ValueError(f"need M > 0, got {M}")
    if not B > 0:
        raise ValueError(f"need B > 0, got {B}")
    return SupNormBound(
        rho_lower=3.0 * M / (4.0 * np.pi * B**3),
        # B * B, not B**2: libm pow is off by an ulp for rare B, which
        # would break the bit-level tie to the field solver's squaring
        e_lower=M / (B * B),
        b_used=B,
    )
