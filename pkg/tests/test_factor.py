import numpy as np
import pytest

from ncsperf.errors import DegenerateError, UnstabilizableError
from ncsperf.factor import (
    ColumnTF,
    blaschke,
    coprime_bezout,
    coprime_mirrored,
    min_phase_split,
    spectral_outer,
)
from ncsperf.ratfun import RatFn, RootSet

GRID50 = np.linspace(-25, 25, 50)
GRID100 = np.logspace(-3, 3, 100)


def test_blaschke_examples():
    assert blaschke(RootSet()).allclose(RatFn.const(1.0))
    assert blaschke(RootSet([(1, 1)])).allclose(RatFn.from_polys([-1, 1], [1, 1]))
    assert blaschke(RootSet([(2, 2)])).allclose(RatFn.from_zpk([2, 2], [-2, -2]))
    with pytest.raises(ValueError):
        blaschke(RootSet([(-1, 1)]))


def test_blaschke_unit_modulus_randomized():
    rng = np.random.default_rng(3)
    for _ in range(30):
        pts = [(complex(rng.uniform(0.1, 5), rng.uniform(-5, 5)), int(rng.integers(1, 3))) for _ in range(rng.integers(1, 4))]
        b = blaschke(RootSet(pts))
        assert np.max(np.abs(np.abs(b(1j * GRID100)) - 1)) < 1e-10


def test_min_phase_split_examples():
    ap, mp = min_phase_split(RatFn([-1, 1], [-1, -2]))
    assert ap.allclose(RatFn.from_zpk([1], [-1])) and mp.allclose(RatFn([1], [-2]))
    ap, mp = min_phase_split(RatFn([1], [-2]))
    assert ap.allclose(RatFn.const(1)) and mp.allclose(RatFn([1], [-2]))
    g = RatFn.from_zpk([1, 3], [-2, -2, -2])
    ap, mp = min_phase_split(g)
    assert sorted(round(z.real, 9) for z in ap.zeros().expanded()) == [1, 3]
    w = np.linspace(-10, 10, 20)
    assert np.allclose(np.abs(g(1j * w)), np.abs(mp(1j * w)), rtol=1e-12)
    assert (ap * mp).allclose(g) and mp.is_min_phase()


def test_coprime_bezout_hand_example():
    g = RatFn.from_polys([-1, 1], [-2, 1])
    c = coprime_bezout(g)
    assert c.M.allclose(RatFn.from_zpk([2], [-1]))
    assert c.N.allclose(RatFn.from_zpk([1], [-1]))
    assert c.X.allclose(RatFn.const(-2)) and c.Y.allclose(RatFn.const(-3))


def test_coprime_bezout_stable_shortcut():
    g = RatFn([1], [-1])
    c = coprime_bezout(g)
    assert c.N.allclose(g) and c.M.allclose(RatFn.const(1))
    assert c.X.allclose(RatFn.const(1)) and c.Y.is_zero()


@pytest.mark.parametrize("factorize", [coprime_bezout, coprime_mirrored])
def test_coprime_lossy_uplink_plant(factorize):
    g = RatFn.from_polys([-3, 1], np.convolve([1, 1], [-2, 1]))
    c = factorize(g)
    assert c.bezout_residual(GRID50) < 1e-10
    assert all(f.in_rh_inf() for f in (c.N, c.M, c.X, c.Y))
    assert (c.N / c.M).allclose(g)


@pytest.mark.parametrize("factorize", [coprime_bezout, coprime_mirrored])
def test_coprime_randomized(factorize):
    rng = np.random.default_rng(11)
    for _ in range(30):
        poles = list(-rng.uniform(0.3, 5, size=rng.integers(0, 3))) + list(rng.uniform(0.3, 4, size=rng.integers(1, 3)))
        zeros = list(rng.uniform(-4, 4, size=rng.integers(0, len(poles))))
        if min(abs(z - p) for z in zeros + [99] for p in poles) < 0.2:
            continue
        g = RatFn.from_zpk(zeros, poles, rng.uniform(0.5, 3))
        c = factorize(g)
        assert c.bezout_residual(GRID50) < 1e-10
        assert all(f.in_rh_inf() for f in (c.N, c.M, c.X, c.Y))
        assert (c.N / c.M).allclose(g, rtol=1e-7)


def test_coprime_rejects_rhp_cancellation():
    g = RatFn([-(2 + 1e-9), 1], [2, -1], cancel_tol=0)
    with pytest.raises(UnstabilizableError):
        coprime_bezout(g)
    with pytest.raises(UnstabilizableError):
        coprime_mirrored(g)


def test_spectral_outer_equal_rows():
    io = spectral_outer(ColumnTF([RatFn([1], [-1]), RatFn([1], [-1])]))
    assert io.outer.allclose(RatFn([np.sqrt(2)], [-1]))


def test_spectral_outer_zero_column_is_degenerate():
    io = spectral_outer(ColumnTF([RatFn.const(0), RatFn.const(0)]))
    assert io.degenerate and io.outer.is_zero()
    with pytest.raises(DegenerateError):
        io.outer_inv()


def test_spectral_outer_axis_zero_rejected():
    with pytest.raises(DegenerateError):
        spectral_outer(ColumnTF([RatFn([0, 1], [-1])]))


def _random_stable(rng, deg):
    poles = list(-rng.uniform(0.3, 6, size=deg))
    num = rng.normal(size=rng.integers(1, deg + 2))
    return RatFn(num, poles)


def test_spectral_outer_invariants_randomized():
    rng = np.random.default_rng(5)
    for _ in range(30):
        rows = [_random_stable(rng, int(rng.integers(1, 6))) for _ in range(int(rng.integers(1, 4)))]
        try:
            io = spectral_outer(ColumnTF(rows))
        except DegenerateError:
            continue
        s = 1j * GRID100
        total = sum(np.abs(r(s)) ** 2 for r in io.inner)
        assert np.max(np.abs(total - 1)) < 1e-8
        assert np.allclose(np.abs(io.outer(s)) ** 2, sum(np.abs(r(s)) ** 2 for r in rows), rtol=1e-8)
        assert io.outer.is_stable() and io.outer.is_min_phase()
        for r, i in zip(rows, io.inner):
            assert np.all(np.abs(i(s) * io.outer(s) - r(s)) <= 1e-8 * np.abs(r(s)) + 1e-14)
