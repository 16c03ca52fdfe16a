"""All-pass, coprime and inner-outer factorizations of scalar transfer functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, UnstabilizableError
from .ratfun import (
    AXIS_TOL,
    RatFn,
    RootSet,
    _from_roots,
    _deflate,
    _near_root,
    _padd,
    _pmul,
    _trim,
    _vanishes_at,
    poly_roots,
)

SPECTRAL_AXIS_TOL = 1e-9
CANCEL_GAP = 1e-6


@dataclass(frozen=True)
class CoprimeData:
    N: RatFn
    M: RatFn
    X: RatFn
    Y: RatFn

    def bezout_residual(self, omegas) -> float:
        s = 1j * np.asarray(omegas, dtype=float)
        r = self.X(s) * self.M(s) - self.Y(s) * self.N(s) - 1.0
        return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class ColumnTF:
    rows: tuple[RatFn, ...]

    def __init__(self, rows):
        object.__setattr__(self, "rows", tuple(r if isinstance(r, RatFn) else RatFn.const(r) for r in rows))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def __call__(self, s):
        return np.array([r(s) for r in self.rows])

    def is_zero(self) -> bool:
        return all(r.is_zero() for r in self.rows)


@dataclass(frozen=True)
class InnerOuter:
    inner: ColumnTF | None
    outer: RatFn
    degenerate: bool = False

    def outer_inv(self) -> RatFn:
        if self.degenerate:
            raise DegenerateError("zero column has no invertible outer factor")
        return self.outer.inv()


def blaschke(roots: RootSet) -> RatFn:
    """Product of ((s - z)/(s + conj z))**m over the given right half-plane points."""
    zeros, poles = [], []
    for z, m in roots:
        if z.real <= AXIS_TOL:
            raise ValueError(f"all-pass root {z} is not in the open right half-plane")
        zeros += [z] * m
        poles += [-np.conj(z)] * m
    return RatFn.from_zpk(zeros, poles)


def min_phase_split(g: RatFn) -> tuple[RatFn, RatFn]:
    """Split g into (all-pass, minimum-phase) with g == allpass * minphase."""
    if g.is_zero():
        return RatFn.const(1.0), g
    zs = g.zeros()
    axis = zs.on_axis()
    if len(axis):
        raise DegenerateError(f"zero on the imaginary axis: {axis}")
    rhp = zs.rhp()
    allpass = blaschke(rhp)
    # mirror the RHP zeros directly instead of dividing, keeps the numerator exact
    keep = zs.lhp().expanded() + [-np.conj(z) for z in rhp.expanded()]
    lead = g.num.lead
    minphase = RatFn(_from_roots(keep) * lead, g.pole_list)
    return allpass, minphase


def _sylvester_solve(a: np.ndarray, b: np.ndarray, rhs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Find x, y of degree <= n-1 with x*a - y*b == rhs (coefficient arrays)."""
    size = 2 * n
    S = np.zeros((size, size), dtype=complex)
    for j in range(n):
        S[j : j + len(a), j] = a
        S[j : j + len(b), n + j] = -b
    r = np.zeros(size, dtype=complex)
    r[: len(rhs)] = rhs
    if np.linalg.cond(S) > 1e13:
        raise DegenerateError("singular Sylvester system: numerator and denominator share a root")
    sol = np.linalg.solve(S, r)
    return sol[:n], sol[n:]


def coprime_bezout(g: RatFn) -> CoprimeData:
    """Coprime factors g = N/M over RH-infinity with X*M - Y*N == 1.

    N and M share the denominator (s+1)**n, n = number of poles.  X and Y come
    from the Diophantine equation x*den - y*num = (s+1)**(2n-1), both of degree
    n-1 and divided by (s+1)**(n-1), which keeps them proper.
    """
    if not g.is_proper():
        raise ValueError("coprime factorization needs a proper function")
    rhp_poles = [p for p in g.pole_list if p.real > -AXIS_TOL]
    if not rhp_poles:
        return CoprimeData(g, RatFn.const(1.0), RatFn.const(1.0), RatFn.const(0.0))
    for z, _ in g.zeros():
        if z.real > -AXIS_TOL:
            for p in rhp_poles:
                if abs(z - p) < CANCEL_GAP * max(1.0, abs(z)):
                    raise UnstabilizableError(z, p)
    num = g.num.coeffs
    den = _from_roots(g.pole_list)
    n = len(g.pole_list)
    c = [-1.0] * n
    rhs = _from_roots([-1.0] * (2 * n - 1))
    x, y = _sylvester_solve(den, num, rhs, n)
    N = RatFn(num, c)
    M = RatFn(den, c)
    X = RatFn(x, [-1.0] * (n - 1))
    Y = RatFn(y, [-1.0] * (n - 1))
    return CoprimeData(N, M, X, Y)


def _sylvester_rect(a: np.ndarray, nx: int, b: np.ndarray, ny: int, rhs: np.ndarray):
    """Find x (nx coeffs), y (ny coeffs) with x*a - y*b == rhs, square system required."""
    size = nx + ny
    S = np.zeros((size, size), dtype=complex)
    for j in range(nx):
        S[j : j + len(a), j] = a
    for j in range(ny):
        S[j : j + len(b), nx + j] = -b
    r = np.zeros(size, dtype=complex)
    r[: len(rhs)] = rhs
    if np.linalg.cond(S) > 1e13:
        raise DegenerateError("singular Sylvester system: numerator and denominator share a root")
    sol = np.linalg.solve(S, r)
    return sol[:nx], sol[nx:]


def coprime_mirrored(g: RatFn) -> CoprimeData:
    """Coprime factors whose only new poles are the unstable poles of g mirrored.

    With g = n/(d_s d_u) (d_u holding the closed-RHP poles, m the mirrored
    polynomial), M = d_u/m is all-pass and N = n/(d_s m).  X = x/(d_s e) and
    Y = y/e, e = m without its first root, solve x d_u - y n = m d_s e.  No
    repeated auxiliary poles are introduced, which keeps products of these
    factors well conditioned.
    """
    if not g.is_proper():
        raise ValueError("coprime factorization needs a proper function")
    unstable = [p for p in g.pole_list if p.real > -AXIS_TOL]
    if not unstable:
        return CoprimeData(g, RatFn.const(1.0), RatFn.const(1.0), RatFn.const(0.0))
    for z, _ in g.zeros():
        if z.real > -AXIS_TOL:
            for p in unstable:
                if abs(z - p) < CANCEL_GAP * max(1.0, abs(z)):
                    raise UnstabilizableError(z, p)
    stable = [p for p in g.pole_list if p.real <= -AXIS_TOL]
    mirror = [-np.conj(p) if p.real > AXIS_TOL else complex(-1.0, p.imag) for p in unstable]
    k, ns = len(unstable), len(stable)
    du = _from_roots(unstable)
    rhs = _pmul(_from_roots(mirror), _pmul(_from_roots(stable), _from_roots(mirror[1:])))
    x, y = _sylvester_rect(du, ns + k, g.num.coeffs, k, rhs)
    return CoprimeData(
        N=RatFn(g.num.coeffs, stable + mirror),
        M=RatFn(du, mirror),
        X=RatFn(x, stable + mirror[1:]),
        Y=RatFn(y, mirror[1:]),
    )


def common_denominator(rows) -> tuple[list[np.ndarray], list[complex]]:
    """Numerators over a least common pole list shared by every row."""
    lcm: list[complex] = []
    for r in rows:
        pending = list(lcm)
        for q in r.pole_list:
            hit = None
            for i, p in enumerate(pending):
                if abs(p - q) <= 1e-7 * max(1.0, abs(p)):
                    hit = i
                    break
            if hit is None:
                lcm.append(q)
            else:
                pending.pop(hit)
    nums = []
    for r in rows:
        rest = list(lcm)
        for q in r.pole_list:
            i = int(np.argmin(np.abs(np.array(rest) - q)))
            rest.pop(i)
        nums.append(_pmul(r.num.coeffs, _from_roots(rest)))
    return nums, lcm


def _para_poly(c: np.ndarray) -> np.ndarray:
    # p~(s) = conj(p(-conj s))
    return np.conj(c) * (-1.0) ** np.arange(len(c))


def _cancel_common(
    phi: np.ndarray, lcm: list[complex]
) -> tuple[np.ndarray, list[complex], list[complex]]:
    """Divide phi by (s - p)(s + conj p) for every shared pole p of the common denominator.

    phi / (d d~) with d = prod(s - p) is the spectral density; factors common to
    both sides would otherwise show up as nearly double roots that the root
    finder splits.
    """
    kept, dropped = [], []
    for p in lcm:
        q = -np.conj(p)
        if len(phi) >= 3 and _near_root(phi, p):
            trial = _deflate(phi, p)
            if _near_root(trial, q):
                phi = _deflate(trial, q)
                dropped.append(p)
                continue
        kept.append(p)
    return phi, kept, dropped


def _lhp_spectral_roots(phi: np.ndarray) -> list[complex]:
    """Left half-plane roots of a para-Hermitian polynomial phi.

    Real rows make phi even, phi(s) = psi(s**2); rooting psi halves the
    degree and keeps the mirrored root pairs exactly symmetric.
    """
    odd = phi[1::2]
    if np.all(np.abs(phi.imag) == 0) and np.all(np.abs(odd) <= 1e-12 * np.max(np.abs(phi))):
        psi = phi[0::2].real
        xs = poly_roots(psi, 1e-7).expanded() if len(_trim(psi)) > 1 else []
        roots = []
        for x in xs:
            r = np.sqrt(complex(x))
            if abs(r.real) <= SPECTRAL_AXIS_TOL * max(1.0, abs(r)):
                raise DegenerateError(f"spectral density has imaginary-axis zeros {[r, -r]}")
            roots.append(-r if r.real > 0 else r)
        return roots
    rs = poly_roots(phi, 1e-7)
    on_axis = [z for z, _ in rs if abs(z.real) <= SPECTRAL_AXIS_TOL * max(1.0, abs(z))]
    if on_axis:
        raise DegenerateError(f"spectral density has imaginary-axis zeros {on_axis}")
    return [z for z in rs.expanded() if z.real < 0]


def spectral_outer(col) -> InnerOuter:
    """Inner-outer factorization of a stable proper column.

    The outer factor is the stable minimum-phase spectral factor of
    sum_k g_k(s) g_k~(s); inner rows are row / outer.
    """
    col = col if isinstance(col, ColumnTF) else ColumnTF(col)
    for r in col:
        if not r.is_zero():
            if not r.is_proper():
                raise ValueError("improper row in inner-outer factorization")
            if not r.is_stable():
                raise ValueError("unstable row in inner-outer factorization")
    live = [r for r in col if not r.is_zero()]
    if not live:
        return InnerOuter(None, RatFn.const(0.0), True)
    nums, lcm = common_denominator(live)
    phi = np.zeros(1, dtype=complex)
    for c in nums:
        phi = _padd(phi, _pmul(c, _para_poly(c)))
    phi = phi.real.astype(complex) if np.all(np.abs(phi.imag) <= 1e-12 * np.max(np.abs(phi))) else phi
    phi = _trim(phi)
    phi, kept, dropped = _cancel_common(phi, lcm)
    if len(phi) == 1:
        roots_lhp: list[complex] = []
    else:
        roots_lhp = _lhp_spectral_roots(phi)
        if 2 * len(roots_lhp) != len(phi) - 1:
            raise DegenerateError("spectral density roots do not split evenly across the axis")
    w = _from_roots(roots_lhp)
    # fix the gain from magnitudes at a few axis points
    probe = 1j * np.array([0.3, 1.1, 2.7, 7.9])
    target = np.abs(np.polynomial.polynomial.polyval(probe, phi))
    got = np.abs(np.polynomial.polynomial.polyval(probe, w)) ** 2
    k = float(np.sqrt(np.median(target / got)))
    outer = RatFn(w * k, kept)
    # row / outer == num_row / (k * w * prod(s - dropped)): built directly so that
    # no numerical pole-zero cancellation is needed
    live_inner = iter([RatFn(c / k, roots_lhp + dropped) for c in nums])
    inner = ColumnTF([RatFn.const(0.0) if r.is_zero() else next(live_inner) for r in col])
    return InnerOuter(inner, outer, False)
