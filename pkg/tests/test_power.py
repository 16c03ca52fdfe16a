import math

import numpy as np
import pytest

from ncsperf.h2opt import canonical_filter, solve, synth_controller
from ncsperf.power import PowerBounds, feasibility_check, min_power_bounds
from ncsperf.quadrature import axis_integral
from problems import classical, power_bound_case, random_noisy


def _bounds(prob):
    sol = solve(prob)
    ctrl = synth_controller(prob, sol.bundle, sol.gammas, strict=False)
    return sol, ctrl, min_power_bounds(prob, sol.bundle, sol.gammas, ctrl)


def test_power_bound_case_structure():
    _, _, b = _bounds(power_bound_case())
    assert b.y_coeffs[1] == 0.0 and b.u_coeffs[1] == 0.0  # no down-link noise
    assert all(math.isfinite(c) and c > 0 for c in (b.y_coeffs[0], b.y_coeffs[2], b.u_coeffs[0], b.u_coeffs[2]))


def test_noise_free_bounds_keep_only_reference_terms():
    _, _, b = _bounds(classical([-2], [-1, -3], sigma_r=0.5))
    assert b.y_coeffs[1:] == (0.0, 0.0) and b.u_coeffs[1:] == (0.0, 0.0)
    assert b.y_coeffs[0] > 0 and b.u_coeffs[0] > 0


def _closed_loop_powers(prob, cop, ctrl):
    """E||y||^2 and E||u||^2 per unit variance from the loop equations with K1 = Q/(X-RN), K2 = (Y-RM)/(X-RN)."""
    P = prob.plant
    F1, F2 = prob.down.F, prob.up.F
    H1, H2 = canonical_filter(prob.down.H), canonical_filter(prob.up.H)

    def maps(w):
        s = 1j * w
        p, f1, f2, h1, h2 = P(s), F1(s), F2(s), H1(s), H2(s)
        xr = cop.X(s) - ctrl.R(s) * cop.N(s)
        k1, k2 = ctrl.Q(s) / xr, (cop.Y(s) - ctrl.R(s) * cop.M(s)) / xr
        inv = 1.0 / (1.0 - k2 * f2 * p * f1)
        y = (p * inv * f1 * k1, p * inv * h1, p * inv * f1 * k2 * h2)
        u = (inv * k1, inv * k2 * f2 * p * h1, inv * k2 * h2)
        return y, u

    out = []
    for which in (0, 1):
        out.append(tuple(axis_integral(lambda w, i=i: float(abs(maps(w)[which][i]) ** 2)) for i in range(3)))
    return out


def test_bounds_match_closed_loop_quadrature():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 3:
        prob = random_noisy(rng)
        sol, ctrl, b = _bounds(prob)
        if set(ctrl.issues) - {"Q unstable"} or not all(map(math.isfinite, b.y_coeffs + b.u_coeffs)):
            continue
        y, u = _closed_loop_powers(prob, sol.bundle.coprime, ctrl)
        assert b.y_coeffs == pytest.approx(y, rel=1e-4)
        assert b.u_coeffs == pytest.approx(u, rel=1e-4)
        checked += 1


def test_feasibility_examples():
    prob = power_bound_case(sigma_r=0.2, sigma2=0.2, gamma_y=1.0)
    bounds = PowerBounds((0.64, 0.0, 2.88), (0.0, 0.0, 0.0))
    y = feasibility_check(prob, bounds)["y"]
    assert y.feasible and y.required == pytest.approx(0.1408)
    assert y.margin == pytest.approx(1 - 0.1408)

    tight = power_bound_case(gamma_y=0.1)
    y = feasibility_check(tight, bounds)["y"]
    assert not y.feasible and y.margin < 0

    edge = power_bound_case(gamma_y=bounds.y_bound(0.2, 0.0, 0.2))
    y = feasibility_check(edge, bounds)["y"]
    assert y.feasible and y.margin == 0.0


def test_power_bounds_reject_negative_coefficients():
    with pytest.raises(ValueError):
        PowerBounds((-1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
