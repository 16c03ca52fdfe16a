import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncsperf.errors import NotStableError, PoleHitError
from ncsperf.oracle import h2_norm_sq_quad
from ncsperf.ratfun import (
    Poly,
    RatFn,
    h2_norm_sq_closed,
    partial_fractions,
    poly_roots,
    rf_derivative_n,
    rf_eval,
    rf_para_conjugate,
)


def roots_of(coeffs):
    return sorted(poly_roots(Poly(coeffs)).entries, key=lambda e: (e[0].real, e[0].imag))


def test_poly_trims_and_reports_degree():
    p = Poly([1, 2, 0, 0])
    assert p.degree == 1 and len(p.coeffs) == 2
    assert Poly([0, 0]).degree == -1


def test_double_root():
    (z, m), = roots_of([1, -2, 1])
    assert m == 2 and abs(z - 1) < 1e-12


def test_conjugate_pair():
    rs = roots_of([1, 0, 1])
    assert [m for _, m in rs] == [1, 1]
    assert np.allclose(sorted(z.imag for z, _ in rs), [-1, 1])


def test_cubic_roots():
    rs = roots_of([-6, 11, -6, 1])
    assert np.allclose([z.real for z, _ in rs], [1, 2, 3]) and all(m == 1 for _, m in rs)


def test_triple_root_clusters():
    rs = roots_of(np.poly([-2, -2, -2, 1])[::-1])
    assert sorted(m for _, m in rs) == [1, 3]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5).filter(lambda x: abs(x) > 0.05), min_size=1, max_size=8))
def test_roots_reconstruct_polynomial(points):
    p = Poly(np.poly(points)[::-1] * 2.5)
    rs = poly_roots(p)
    assert rs.total == p.degree
    rebuilt = np.poly(rs.expanded())[::-1]
    target = p.coeffs / p.lead
    assert np.all(np.abs(rebuilt - target) <= 1e-6 * np.maximum(1, np.abs(target)))


def test_rf_eval_examples():
    allpass = RatFn.from_polys([-1, 1], [1, 1])
    assert abs(rf_eval(allpass, 1j) - 1j) < 1e-14
    assert rf_eval(RatFn([1], [-1]), 0) == 1
    g = RatFn.from_polys([-3, 1], np.convolve([1, 1], [-2, 1]))
    assert abs(rf_eval(g, 1j) - (1j - 3) / ((1j + 1) * (1j - 2))) < 1e-14
    with pytest.raises(PoleHitError):
        rf_eval(g, 2.0)


def test_cancellation_is_canonical():
    a = RatFn.from_polys([1, 3], [2, 3, 1])
    b = RatFn.from_polys([-1, 0, 1], [5, 1])
    q = (a * b) / b
    assert q.allclose(a) and len(q.pole_list) == len(a.pole_list)


def test_first_derivative():
    d = rf_derivative_n(RatFn([1], [-1]), 1)
    assert d.allclose(RatFn([-1], [-1, -1]))
    g = RatFn.from_polys([2, 1], [3, 1])
    assert rf_derivative_n(g, 0).allclose(g)


def test_second_derivative_matches_finite_differences():
    # s/(s+2) = 1 - 2/(s+2), so the second derivative is -4/(s+2)^3
    g = RatFn.from_polys([0, 1], [2, 1])
    d2 = rf_derivative_n(g, 2)
    assert d2.allclose(RatFn([-4], [-2, -2, -2]))
    h = 1e-5
    for s0 in [0.3, 1.0 + 0.5j, -1.0, 2.5j, 4.0]:
        fd = (g(s0 + h) - 2 * g(s0) + g(s0 - h)) / h**2
        assert abs(fd - d2(s0)) <= 1e-4 * abs(d2(s0))


def test_para_conjugate_examples():
    assert rf_para_conjugate(RatFn([1], [-1])).allclose(RatFn.from_polys([1], [1, -1]))
    assert rf_para_conjugate(RatFn.const(2 + 3j)).allclose(RatFn.const(2 - 3j))
    g = RatFn([2, 1 + 1j], [-3])
    w = np.linspace(-5, 5, 10)
    assert np.allclose(rf_para_conjugate(g)(1j * w), np.conj(g(1j * w)))


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.complex_numbers(max_magnitude=4), min_size=0, max_size=3),
    st.lists(st.floats(0.2, 5), min_size=1, max_size=4),
)
def test_para_conjugate_involution_and_magnitude(zeros, poles):
    g = RatFn.from_zpk(zeros, [-p for p in poles], 1.5 - 0.5j)
    gg = rf_para_conjugate(rf_para_conjugate(g))
    assert gg.allclose(g)
    w = np.logspace(-2, 2, 100)
    assert np.max(np.abs(np.abs(rf_para_conjugate(g)(1j * w)) - np.abs(g(1j * w)))) < 1e-10


def test_h2_closed_examples():
    assert h2_norm_sq_closed(RatFn([1], [-1])) == pytest.approx(0.5, rel=1e-14)
    assert h2_norm_sq_closed(RatFn([1], [-4])) == pytest.approx(0.125, rel=1e-14)
    assert h2_norm_sq_closed(RatFn([1], [-1, -1])) == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(NotStableError):
        h2_norm_sq_closed(RatFn([1], [1]))
    with pytest.raises(NotStableError):
        h2_norm_sq_closed(RatFn([1, 1], [-2]))


def test_h2_closed_matches_quadrature_randomized():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = rng.integers(1, 7)
        poles = []
        while len(poles) < n:
            if n - len(poles) >= 2 and rng.random() < 0.4:
                a, b = rng.uniform(0.2, 4), rng.uniform(0.1, 5)
                poles += [complex(-a, b), complex(-a, -b)]
            else:
                poles.append(-rng.uniform(0.2, 6))
        num = rng.normal(size=rng.integers(1, len(poles) + 1))
        g = RatFn(num, poles)
        assert h2_norm_sq_closed(g) == pytest.approx(h2_norm_sq_quad(g), rel=1e-6)


def test_partial_fractions_repeated_pole():
    g = RatFn([1], [1, 1, -2])
    terms = {(round(p.real, 8), d): c for p, d, c in partial_fractions(g)}
    # 1/((s-1)^2 (s+2)) = 1/3/(s-1)^2 - 1/9/(s-1) + 1/9/(s+2)
    assert terms[(1.0, 2)] == pytest.approx(1 / 3)
    assert terms[(1.0, 1)] == pytest.approx(-1 / 9)
    assert terms[(-2.0, 1)] == pytest.approx(1 / 9)
