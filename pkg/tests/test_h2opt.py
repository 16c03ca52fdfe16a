import numpy as np
import pytest

from ncsperf.errors import PerformanceUnbounded
from ncsperf.h2opt import (
    Channel,
    Problem,
    ResidueTerm,
    antistable_project,
    build_bundle,
    compute_jstar,
    h2_cross_sum,
    solve,
    synth_controller,
)
from ncsperf.oracle import evaluate_noise_cost, h2_norm_sq_quad, mirrored, ritz_min_j
from ncsperf.ratfun import Poly, RatFn, RootSet
from problems import classical, lossy_uplink, lowpass

GRID = np.linspace(-30, 30, 61)


def two_zero_two_pole(sigma=0.1) -> Problem:
    """Two NMP zeros (3, 5), two unstable poles (1, 2), noisy links."""
    return Problem(
        Poly(np.real(np.poly([3, 5])[::-1])),
        Poly(np.real(np.poly([-1, 1, 2])[::-1])),
        Channel(RatFn.const(1.0), lowpass(2.0), sigma),
        Channel(lowpass(1.0), lowpass(1.0), sigma),
        eps1=0.5, eps2=0.2, eps3=0.3, sigma_r=0.2,
    )


def test_antistable_project_partial_fractions():
    f = RatFn([1.0], [1.0, -1.0])
    terms, stable = antistable_project(f, RootSet([(1, 1)]))
    assert len(terms) == 1 and terms[0].order == 1
    assert terms[0].coeff == pytest.approx(0.5)
    assert stable.allclose(RatFn([-0.5], [-1.0]))


def test_antistable_project_stable_input_is_identity():
    f = RatFn([2.0, 1.0], [-1.0, -3.0])
    terms, stable = antistable_project(f, RootSet())
    assert terms == [] and stable.allclose(f)


def test_antistable_project_double_pole_matches_linear_solve():
    # 1/((s-1)^2 (s+2)) = a/(s-1) + b/(s-1)^2 + c/(s+2); match coefficients of a(s-1)(s+2) + b(s+2) + c(s-1)^2 = 1
    A = np.array([[1, 0, 1], [1, 1, -2], [-2, 2, 1]], dtype=float)
    a, b, c = np.linalg.solve(A, [0, 0, 1])
    f = RatFn([1.0], [1.0, 1.0, -2.0])
    terms, stable = antistable_project(f, RootSet([(1, 2)]))
    coeffs = {t.order: t.coeff for t in terms}
    assert coeffs[1] == pytest.approx(a) and coeffs[2] == pytest.approx(b)
    assert stable.allclose(RatFn([c], [-2.0]))
    rebuilt = sum((t.as_ratfn() for t in terms), stable)
    assert rebuilt.allclose(f)


def test_antistable_project_rejects_wrong_declaration():
    with pytest.raises(ValueError):
        antistable_project(RatFn([1.0], [1.0, -1.0]), RootSet([(2, 1)]))


def test_cross_sum_examples():
    assert h2_cross_sum([ResidueTerm(1 + 0j, 1, 1 + 0j)]) == pytest.approx(0.5)
    assert h2_cross_sum([ResidueTerm(3 + 0j, 1, 2 + 0j)]) == pytest.approx(2 / 3)
    terms = [ResidueTerm(1 + 0j, 1, 1 + 0j), ResidueTerm(2 + 0j, 2, 1 + 0j)]
    assert h2_cross_sum(terms) == pytest.approx(h2_norm_sq_quad(mirrored(terms)), rel=1e-6)
    with pytest.raises(ValueError):
        ResidueTerm(-1 + 0j, 1, 1 + 0j)


def test_cross_sum_matches_quadrature_randomized():
    rng = np.random.default_rng(11)
    for _ in range(30):
        terms = []
        for _ in range(rng.integers(1, 5)):
            z = complex(rng.uniform(0.2, 4), rng.uniform(-3, 3))
            for d in range(1, int(rng.integers(1, 4)) + 1):
                terms.append(ResidueTerm(z, d, complex(rng.normal(), rng.normal())))
        assert h2_cross_sum(terms) == pytest.approx(h2_norm_sq_quad(mirrored(terms)), rel=1e-6)


def test_jstar_classical_examples():
    assert compute_jstar(classical([3], [-1, -2])).total == pytest.approx(6.0, abs=1e-10)
    assert compute_jstar(classical([-3], [-1, -2])).total == pytest.approx(0.0, abs=1e-10)


def test_jstar_lossy_uplink_golden():
    bd = compute_jstar(lossy_uplink())
    assert bd.term_zero_sum == pytest.approx(0.12, abs=1e-10)
    assert bd.term_g1 == 0.0
    assert bd.term_g2 == pytest.approx(1.0, rel=1e-8)
    assert bd.term_power == pytest.approx(-1.25)
    assert bd.total == pytest.approx(-0.13, abs=1e-8)
    assert bd.total == pytest.approx(sum(bd.terms()), abs=1e-10)


def test_lossy_uplink_agrees_with_ritz_oracle():
    bd = compute_jstar(lossy_uplink())
    ritz = ritz_min_j(lossy_uplink())
    cost = bd.total - bd.term_power
    assert ritz.j_approx >= bd.total - 1e-8
    assert (ritz.j_approx - bd.total) / cost < 0.01


def test_bundle_invariants_lossy_uplink():
    b = build_bundle(lossy_uplink())
    s = 1j * GRID
    cop = b.coprime
    assert np.max(np.abs(cop.X(s) * cop.M(s) - cop.Y(s) * cop.N(s) - 1)) < 1e-10
    for inner in (b.omega, b.delta, b.lam):
        if inner.degenerate:
            continue
        total = sum(np.abs(r(s)) ** 2 for r in inner.inner.rows)
        assert np.max(np.abs(total - 1)) < 1e-8
    assert np.max(np.abs(np.abs(b.B(s)) - 1)) < 1e-10
    assert np.max(np.abs(np.abs(b.L(s)) - 1)) < 1e-10


def test_two_zero_two_pole_root_structure():
    sol = solve(two_zero_two_pole())
    b = sol.bundle
    poles = sorted(b.unstable_poles, key=lambda pm: pm[0].real)
    assert [m for _, m in poles] == [1, 1]
    assert [p.real for p, _ in poles] == pytest.approx([1.0, 2.0])
    nmp = {round(p.real, 8) for p, _ in b.nmp_zeros}
    assert {3.0, 5.0} <= nmp
    g2 = sorted(sol.gammas.g2_terms, key=lambda t: t.pole.real)
    assert [t.order for t in g2] == [1, 1]
    assert [t.pole.real for t in g2] == pytest.approx([1.0, 2.0])
    assert sol.breakdown.term_g2 == pytest.approx(h2_norm_sq_quad(mirrored(sol.gammas.g2_terms)), rel=1e-6)


def test_no_down_link_noise_gives_empty_g1():
    assert solve(lossy_uplink()).gammas.g1_terms == []


def test_upsilon_vanishes_without_power_weights():
    prob = classical([2], [-1, -3], eps1=1.0, sigma_r=0.5)
    sol = solve(prob)
    assert sol.upsilon1 == pytest.approx(0.0, abs=1e-12)


def test_near_cancellation_is_unbounded():
    with pytest.raises(PerformanceUnbounded, match="performance unbounded"):
        compute_jstar(lossy_uplink(k=2.000001, p=2.0))


def test_synthesized_loop_is_stable():
    for prob in (lossy_uplink(), two_zero_two_pole()):
        sol = solve(prob)
        ctrl = synth_controller(prob, sol.bundle, sol.gammas, strict=False)
        assert max(p.real for p in ctrl.S.pole_list) < -1e-9


def test_optimal_r_attains_noise_cost():
    prob = two_zero_two_pole()
    sol = solve(prob)
    bd = sol.breakdown
    ctrl = synth_controller(prob, sol.bundle, sol.gammas, strict=False)
    noise = bd.term_g1 + bd.term_g2 + bd.term_g3 + bd.term_residual
    assert evaluate_noise_cost(prob, ctrl.R) == pytest.approx(noise, rel=1e-6)


def test_youla_loop_sensitivity_identity():
    # Bezout X M - Y N = 1 gives 1 - P K2 = 1/(M (X - R N)) (positive-feedback convention)
    prob = lossy_uplink()
    sol = solve(prob)
    ctrl = synth_controller(prob, sol.bundle, sol.gammas, strict=False)
    s = 1j * GRID
    cop = sol.bundle.coprime
    P = cop.N / cop.M
    lhs = 1 - P(s) * ctrl.K2(s)
    rhs = 1 / ctrl.S(s)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-9
