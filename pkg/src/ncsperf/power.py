"""Minimum channel input-power bounds at the optimal two-parameter controller.

Each bound is a quadratic form in (sigma_r^2, sigma1^2, sigma2^2) whose
coefficients are squared H2 norms of closed-loop maps evaluated at the
optimal Youla parameters Q and R:

    E||y||^2 = ||F1 N_hat Q||^2 sr^2 + ||N_hat (X - R N) H1||^2 s1^2 + ||F1 N_hat (Y - R M) H2||^2 s2^2
    E||u||^2 = ||M Q||^2 sr^2        + ||F2 N_hat (Y - R M) H1||^2 s1^2 + ||M (Y - R M) H2||^2 s2^2
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotStableError
from .h2opt import ControllerPair, FactorizationBundle, Gammas, Problem
from .quadrature import DEFAULT_RTOL, axis_integral
from .ratfun import RatFn, h2_norm_sq_closed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerBounds:
    """Gamma_y >= c_r sr^2 + c_1 s1^2 + c_2 s2^2 and likewise Gamma_u with d_*."""

    y_coeffs: tuple[float, float, float]
    u_coeffs: tuple[float, float, float]

    def __post_init__(self):
        for c in (*self.y_coeffs, *self.u_coeffs):
            if c < 0:
                raise ValueError("power coefficients must be nonnegative")

    def y_bound(self, sigma_r: float, sigma1: float, sigma2: float) -> float:
        cr, c1, c2 = self.y_coeffs
        return cr * sigma_r**2 + c1 * sigma1**2 + c2 * sigma2**2

    def u_bound(self, sigma_r: float, sigma1: float, sigma2: float) -> float:
        dr, d1, d2 = self.u_coeffs
        return dr * sigma_r**2 + d1 * sigma1**2 + d2 * sigma2**2


@dataclass(frozen=True)
class ChannelReport:
    budget: float
    required: float
    feasible: bool
    margin: float


def _has_close_poles(poles: np.ndarray, rel: float = 1e-4) -> bool:
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            d = abs(poles[i] - poles[j])
            if 0 < d < rel * max(1.0, abs(poles[i])):
                return True
    return False


def _norm_sq(g: RatFn, pointwise, rtol: float) -> float:
    """Squared H2 norm of g by quadrature over the pointwise factor product.

    The assembled RatFn g only decides structure (zero, decay); its values
    come from ``pointwise`` because multiplying out factors with clustered
    poles loses accuracy.  A closed-form cross-check runs when g is stable
    with well separated poles.
    """
    if g.is_zero():
        return 0.0
    if not g.is_strictly_proper():
        # the optimal parameters are only approached, never attained: no finite budget suffices
        log.warning("power expression does not decay at high frequency; bound is infinite")
        return math.inf
    val = axis_integral(lambda w: float(abs(pointwise(1j * w)) ** 2), rtol=rtol)
    if _has_close_poles(g.pole_list):
        return val
    try:
        ref = h2_norm_sq_closed(g)
    except NotStableError:
        return val
    if abs(val - ref) > 1e-6 * max(abs(ref), 1e-12):
        log.warning("power coefficient quadrature %.12g disagrees with closed form %.12g", val, ref)
    return val


def min_power_bounds(
    prob: Problem,
    bundle: FactorizationBundle,
    gammas: Gammas,
    controller: ControllerPair,
    rtol: float = DEFAULT_RTOL,
) -> PowerBounds:
    cop = bundle.coprime
    Q, R = controller.Q, controller.R
    F1, F2 = prob.down.F, prob.up.F
    H1, H2 = bundle.H1, bundle.H2
    nh, M = bundle.N_hat, cop.M
    xr = cop.X - R * cop.N
    yr = cop.Y - R * cop.M

    def xr_at(s):
        return cop.X(s) - R(s) * cop.N(s)

    def yr_at(s):
        return cop.Y(s) - R(s) * M(s)

    y_exprs = (
        (F1 * nh * Q, lambda s: F1(s) * nh(s) * Q(s)),
        (nh * xr * H1, lambda s: nh(s) * xr_at(s) * H1(s)),
        (F1 * nh * yr * H2, lambda s: F1(s) * nh(s) * yr_at(s) * H2(s)),
    )
    u_exprs = (
        (M * Q, lambda s: M(s) * Q(s)),
        (F2 * nh * yr * H1, lambda s: F2(s) * nh(s) * yr_at(s) * H1(s)),
        (M * yr * H2, lambda s: M(s) * yr_at(s) * H2(s)),
    )
    y = tuple(_norm_sq(g, f, rtol) for g, f in y_exprs)
    u = tuple(_norm_sq(g, f, rtol) for g, f in u_exprs)
    return PowerBounds(y, u)


def feasibility_check(prob: Problem, bounds: PowerBounds) -> dict[str, ChannelReport]:
    """Compare the configured budgets with the bounds; margin = budget - required."""
    sr, s1, s2 = prob.sigma_r, prob.down.sigma, prob.up.sigma
    out = {}
    for name, budget, need in (
        ("y", prob.gamma_y, bounds.y_bound(sr, s1, s2)),
        ("u", prob.gamma_u, bounds.u_bound(sr, s1, s2)),
    ):
        margin = budget - need
        out[name] = ChannelReport(budget, need, margin >= 0, margin)
    return out
