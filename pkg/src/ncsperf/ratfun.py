"""Scalar polynomial and rational-function algebra in the Laplace variable s.

Polynomials hold complex coefficients in ascending degree order.  A rational
function is stored as a numerator polynomial over a monic denominator given by
its pole list, so products, para-conjugates and all-pass factors never need to
re-root a denominator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotStableError, PoleHitError

CLUSTER_TOL = 1e-7
CANCEL_TOL = 1e-9
AXIS_TOL = 1e-9


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex).ravel()
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    nz = np.nonzero(np.abs(c) > 1e-14 * scale)[0]
    return c[: nz[-1] + 1].copy()


def _pmul(a, b):
    return np.convolve(a, b)


def _padd(a, b):
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=complex)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def _peval(c, s):
    # Horner, ascending coefficients; broadcasts over s
    s = np.asarray(s, dtype=complex)
    acc = np.zeros_like(s) + c[-1]
    for k in range(len(c) - 2, -1, -1):
        acc = acc * s + c[k]
    return acc


def _from_roots(points: Sequence[complex]) -> np.ndarray:
    c = np.ones(1, dtype=complex)
    for p in points:
        c = _pmul(c, np.array([-p, 1.0], dtype=complex))
    return c


def _deflate(c: np.ndarray, p: complex) -> np.ndarray:
    """Synthetic division by (s - p), remainder dropped."""
    n = len(c) - 1
    q = np.zeros(n, dtype=complex)
    acc = c[-1]
    for k in range(n - 1, -1, -1):
        q[k] = acc
        acc = c[k] + acc * p
    return q


def _vanishes_at(c: np.ndarray, p: complex, tol: float) -> bool:
    if len(c) <= 1:
        return False
    powers = np.abs(p) ** np.arange(len(c))
    scale = float(np.sum(np.abs(c) * powers))
    return abs(_peval(c, p)) <= tol * scale


def _near_root(c: np.ndarray, p: complex, tol: float = CANCEL_TOL, dist: float = 1e-8) -> bool:
    """True when p lies on a root of c, exact multiple roots included.

    A cheap relative-residual screen first; then the distance to the nearest
    root is estimated as (k! |c(p)| / |c^(k)(p)|)**(1/k) with k the lowest
    derivative that does not vanish at p, and compared with dist**(1/k).
    The residual screen alone is too lax for high-degree numerators.
    """
    if not _vanishes_at(c, p, tol):
        return False
    fval = abs(_peval(c, p))
    q = c
    fact = 1.0
    for k in range(1, len(c)):
        q = q[1:] * np.arange(1, len(q))
        fact *= k
        if not _vanishes_at(q, p, tol):
            d = (fact * fval / abs(_peval(q, p))) ** (1.0 / k)
            return d <= dist ** (1.0 / k) * max(1.0, abs(p))
    return True


def _taylor_shift(c: np.ndarray, a: complex) -> np.ndarray:
    """Coefficients of c(a + t) in powers of t."""
    c = np.array(c, dtype=complex)
    n = len(c)
    out = c.copy()
    for i in range(n - 1):
        for k in range(n - 2, i - 1, -1):
            out[k] += a * out[k + 1]
    return out


@dataclass(frozen=True)
class Poly:
    """Polynomial with complex coefficients, ascending degree."""

    coeffs: np.ndarray

    def __init__(self, coeffs: Iterable[complex]):
        c = np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", _trim(c))

    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    @property
    def lead(self) -> complex:
        return complex(self.coeffs[-1])

    def __call__(self, s):
        return _peval(self.coeffs, s)

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(_padd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return Poly(_padd(self.coeffs, -other.coeffs))

    def __mul__(self, other) -> "Poly":
        if isinstance(other, Poly):
            return Poly(_pmul(self.coeffs, other.coeffs))
        return Poly(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Poly":
        return Poly(-self.coeffs)

    def deriv(self) -> "Poly":
        if len(self.coeffs) == 1:
            return Poly([0])
        return Poly(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Poly({np.round(self.coeffs, 12).tolist()})"


@dataclass(frozen=True)
class RootSet:
    """Multiset of complex points with integer multiplicities."""

    entries: tuple[tuple[complex, int], ...] = ()

    def __init__(self, entries: Iterable[tuple[complex, int]] = ()):
        object.__setattr__(self, "entries", tuple((complex(p), int(m)) for p, m in entries))
        for _, m in self.entries:
            if m < 1:
                raise ValueError("multiplicities must be positive")

    @classmethod
    def from_points(cls, points: Iterable[complex], tol: float = CLUSTER_TOL) -> "RootSet":
        return cls(cluster(list(points), tol))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.entries)

    def expanded(self) -> list[complex]:
        return [p for p, m in self.entries for _ in range(m)]

    def rhp(self, axis_tol: float = AXIS_TOL) -> "RootSet":
        return RootSet([(p, m) for p, m in self.entries if p.real > axis_tol])

    def lhp(self, axis_tol: float = AXIS_TOL) -> "RootSet":
        return RootSet([(p, m) for p, m in self.entries if p.real < -axis_tol])

    def on_axis(self, axis_tol: float = AXIS_TOL) -> "RootSet":
        return RootSet([(p, m) for p, m in self.entries if abs(p.real) <= axis_tol])

    def __repr__(self) -> str:
        body = ", ".join(f"({p:.6g}, {m})" for p, m in self.entries)
        return f"RootSet[{body}]"


def cluster(points: list[complex], tol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
    """Merge points closer than ``tol`` (relative to magnitude, absolute near 0)."""
    remaining = sorted(points, key=lambda z: (z.real, z.imag))
    out: list[tuple[complex, int]] = []
    while remaining:
        seed = remaining.pop(0)
        group = [seed]
        changed = True
        while changed:
            changed = False
            centre = sum(group) / len(group)
            radius = tol * max(1.0, abs(centre))
            for z in list(remaining):
                if abs(z - centre) <= radius * max(1, len(group)):
                    group.append(z)
                    remaining.remove(z)
                    changed = True
        out.append((complex(sum(group) / len(group)), len(group)))
    return out


def _multiplicity_tol(c: np.ndarray, tol: float) -> float:
    # a root of multiplicity m is only resolved to ~eps**(1/m); widen the merge
    # radius so that clustered roots from the companion matrix are recognised
    return max(tol, 1e-3)


def poly_roots(p: Poly, tol: float = CLUSTER_TOL) -> RootSet:
    """Roots of ``p`` with multiplicities.

    Eigenvalues of the companion matrix, one Newton polish step for isolated
    roots, then clustering.  Candidate clusters wider than ``tol`` are accepted
    only when the derivatives of ``p`` vanish at the cluster centre, which is
    how genuine repeated roots show up after the eigenvalue solve.
    """
    if not isinstance(p, Poly):
        p = Poly(p)
    if p.is_zero():
        raise ValueError("zero polynomial has no root set")
    if p.degree <= 0:
        return RootSet()
    c = p.coeffs
    raw = np.polynomial.polynomial.polyroots(c)
    dc = Poly(c).deriv().coeffs
    polished = []
    for r in raw:
        d = _peval(dc, r)
        # skip the polish near multiple roots, where p and p' are both noise
        if not _vanishes_at(dc, r, 1e-8):
            step = _peval(c, r) / d
            cand = r - step
            if abs(_peval(c, cand)) < abs(_peval(c, r)):
                r = cand
        polished.append(complex(r))
    fine = cluster(polished, tol)
    wide = cluster(polished, _multiplicity_tol(c, tol))
    if len(wide) == len(fine):
        return _snap_real(RootSet(fine), c)
    # keep a wide cluster only if p and its first m-1 derivatives vanish there
    accepted: list[tuple[complex, int]] = []
    for centre, m in wide:
        members = [e for e in fine if abs(e[0] - centre) <= _multiplicity_tol(c, tol) * max(1.0, abs(centre)) * m]
        if len(members) <= 1:
            accepted.extend(members or [(centre, m)])
            continue
        # p^(j) must vanish at the centre to about eps**((m - j)/m)
        q = c
        ok = True
        for j in range(m):
            if not _vanishes_at(q, centre, 10.0 * 1e-12 ** ((m - j) / m)):
                ok = False
                break
            q = Poly(q).deriv().coeffs
        accepted.extend([(centre, m)] if ok else members)
    return _snap_real(RootSet(accepted), c)


def _snap_real(rs: RootSet, c: np.ndarray) -> RootSet:
    if np.any(np.abs(c.imag) > 0):
        return rs
    out = []
    for z, m in rs:
        if abs(z.imag) <= 1e-6 * max(1.0, abs(z)) and m > 1:
            z = complex(z.real, 0.0)
        out.append((z, m))
    return RootSet(out)


class RatFn:
    """Rational function num(s) / prod(s - poles).

    Instances are immutable and kept canonical: any pole at which the numerator
    vanishes is cancelled on construction.  The denominator is monic, so the
    scalar gain lives entirely in the numerator.
    """

    __slots__ = ("_num", "_poles", "_zeros")

    def __init__(self, num, poles: Iterable[complex] = (), *, cancel_tol: float = CANCEL_TOL):
        c = num.coeffs if isinstance(num, Poly) else _trim(np.atleast_1d(np.asarray(num, dtype=complex)))
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite numerator coefficients")
        pl = [complex(p) for p in poles]
        if not all(np.isfinite(p) for p in pl):
            raise ValueError("non-finite pole")
        if len(c) == 1 and c[0] == 0:
            pl = []
        else:
            kept = []
            for p in pl:
                if len(c) > 1 and _near_root(c, p, cancel_tol):
                    c = _deflate(c, p)
                else:
                    kept.append(p)
            pl = kept
        self._num = _trim(c)
        self._poles = np.array(pl, dtype=complex)
        self._zeros = None

    # constructors
    @classmethod
    def const(cls, k: complex) -> "RatFn":
        return cls([k])

    @classmethod
    def s(cls) -> "RatFn":
        return cls([0, 1])

    @classmethod
    def from_polys(cls, num, den, tol: float = CLUSTER_TOL, cancel_tol: float = CANCEL_TOL) -> "RatFn":
        num = num if isinstance(num, Poly) else Poly(num)
        den = den if isinstance(den, Poly) else Poly(den)
        if den.is_zero():
            raise ValueError("denominator is identically zero")
        poles = poly_roots(den, tol).expanded() if den.degree > 0 else []
        return cls(num.coeffs / den.lead, poles, cancel_tol=cancel_tol)

    @classmethod
    def from_zpk(cls, zeros: Iterable[complex], poles: Iterable[complex], gain: complex = 1.0) -> "RatFn":
        return cls(_from_roots(list(zeros)) * complex(gain), list(poles))

    # structure
    @property
    def num(self) -> Poly:
        return Poly(self._num)

    @property
    def den(self) -> Poly:
        return Poly(_from_roots(self._poles))

    @property
    def pole_list(self) -> np.ndarray:
        return self._poles.copy()

    def poles(self, tol: float = CLUSTER_TOL) -> RootSet:
        return RootSet.from_points(self._poles, tol)

    def zeros(self, tol: float = CLUSTER_TOL) -> RootSet:
        if self._zeros is None:
            self._zeros = poly_roots(self.num, tol) if len(self._num) > 1 else RootSet()
        return self._zeros

    def is_zero(self) -> bool:
        return len(self._num) == 1 and self._num[0] == 0

    @property
    def relative_degree(self) -> int:
        if self.is_zero():
            return 10**9
        return len(self._poles) - (len(self._num) - 1)

    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def is_strictly_proper(self) -> bool:
        return self.relative_degree >= 1

    def is_stable(self, axis_tol: float = AXIS_TOL) -> bool:
        return bool(np.all(self._poles.real < -axis_tol))

    def in_rh_inf(self, axis_tol: float = AXIS_TOL) -> bool:
        return self.is_proper() and self.is_stable(axis_tol)

    def is_min_phase(self, axis_tol: float = AXIS_TOL) -> bool:
        return all(z.real < -axis_tol for z, _ in self.zeros())

    def value_at_infinity(self) -> complex:
        rd = self.relative_degree
        if rd > 0:
            return 0j
        if rd == 0:
            return complex(self._num[-1])
        raise ValueError("improper function is unbounded at infinity")

    # evaluation
    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        den = np.ones_like(s)
        for p in self._poles:
            den = den * (s - p)
        return _peval(self._num, s) / den

    # arithmetic
    def _coerce(self, other) -> "RatFn":
        if isinstance(other, RatFn):
            return other
        if isinstance(other, Poly):
            return RatFn(other)
        return RatFn.const(other)

    def __add__(self, other) -> "RatFn":
        other = self._coerce(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        mine = list(self._poles)
        extra_other = []  # poles of other not present in self
        unmatched_self = list(mine)
        for q in other._poles:
            hit = None
            for i, p in enumerate(unmatched_self):
                if abs(p - q) <= CLUSTER_TOL * max(1.0, abs(p)):
                    hit = i
                    break
            if hit is None:
                extra_other.append(q)
            else:
                unmatched_self.pop(hit)
        num = _padd(_pmul(self._num, _from_roots(extra_other)), _pmul(other._num, _from_roots(unmatched_self)))
        return RatFn(num, mine + extra_other)

    __radd__ = __add__

    def __neg__(self) -> "RatFn":
        out = RatFn.__new__(RatFn)
        out._num = -self._num
        out._poles = self._poles.copy()
        out._zeros = self._zeros
        return out

    def __sub__(self, other) -> "RatFn":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "RatFn":
        return self._coerce(other) - self

    def __mul__(self, other) -> "RatFn":
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return RatFn([0])
        return RatFn(_pmul(self._num, other._num), list(self._poles) + list(other._poles))

    __rmul__ = __mul__

    def inv(self) -> "RatFn":
        if self.is_zero():
            raise ZeroDivisionError("inverse of the zero function")
        lead = self._num[-1]
        return RatFn(_from_roots(self._poles) / lead, self.zeros().expanded())

    def __truediv__(self, other) -> "RatFn":
        other = self._coerce(other)
        return self * other.inv()

    def __rtruediv__(self, other) -> "RatFn":
        return self._coerce(other) * self.inv()

    def __pow__(self, n: int) -> "RatFn":
        if n < 0:
            return self.inv() ** (-n)
        out = RatFn.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, k: complex) -> "RatFn":
        return RatFn(self._num * complex(k), self._poles)

    def allclose(self, other, rtol: float = 1e-8, atol: float = 1e-10, points=None) -> bool:
        """Pointwise comparison on a spread of test points off both pole sets."""
        other = self._coerce(other)
        if points is None:
            points = _probe_points(np.concatenate([self._poles, other._poles]))
        a, b = self(points), other(points)
        return bool(np.all(np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a), np.abs(b))))

    def __repr__(self) -> str:
        return f"RatFn(num={np.round(self._num, 10).tolist()}, poles={np.round(self._poles, 10).tolist()})"


def _probe_points(avoid: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(12345)
    pts = rng.normal(size=24) * 3 + 1j * rng.normal(size=24) * 3
    if len(avoid):
        keep = [p for p in pts if np.min(np.abs(avoid - p)) > 1e-3]
        pts = np.array(keep)
    return pts


def rf_eval(g: RatFn, s0: complex, tol: float = 1e-12) -> complex:
    for p in g.pole_list:
        if abs(s0 - p) <= tol * max(1.0, abs(p)):
            raise PoleHitError(p)
    return complex(g(s0))


def rf_derivative(g: RatFn) -> RatFn:
    n = g.num
    d = g.den
    num = n.deriv() * d - n * d.deriv()
    return RatFn(num, list(g.pole_list) * 2)


def rf_derivative_n(g: RatFn, n: int) -> RatFn:
    if n < 0:
        raise ValueError("derivative order must be nonnegative")
    for _ in range(n):
        g = rf_derivative(g)
    return g


def rf_para_conjugate(g: RatFn) -> RatFn:
    """g~(s) = conj(g(-conj(s)))."""
    c = np.conj(g.num.coeffs) * (-1.0) ** np.arange(len(g.num.coeffs))
    poles = -np.conj(g.pole_list)
    c = c * (-1.0) ** len(poles)
    return RatFn(c, poles)


def laurent_at(g: RatFn, p: complex, mult: int, order: int) -> np.ndarray:
    """First ``order`` Taylor coefficients of (s - p)**mult * g(s) about p.

    ``mult`` copies of ``p`` are removed from g's pole list by matching; the
    caller guarantees they are there.
    """
    poles = list(g.pole_list)
    removed = 0
    for _ in range(mult):
        idx = int(np.argmin(np.abs(np.array(poles) - p))) if poles else -1
        if idx < 0 or abs(poles[idx] - p) > 1e-6 * max(1.0, abs(p)):
            break
        poles.pop(idx)
        removed += 1
    if removed != mult:
        raise ValueError(f"pole {p} does not have multiplicity {mult}")
    a = _taylor_shift(g.num.coeffs, p)
    b = _taylor_shift(_from_roots(poles), p)
    a = np.concatenate([a, np.zeros(max(0, order - len(a)), dtype=complex)])[:order]
    b = np.concatenate([b, np.zeros(max(0, order - len(b)), dtype=complex)])[:order]
    out = np.zeros(order, dtype=complex)
    for k in range(order):
        acc = a[k] - np.dot(out[:k], b[k:0:-1]) if k else a[k]
        out[k] = acc / b[0]
    return out


def partial_fractions(g: RatFn, tol: float = CLUSTER_TOL) -> list[tuple[complex, int, complex]]:
    """(pole, power, coefficient) terms of the strictly proper part of g."""
    terms = []
    for p, m in g.poles(tol):
        c = laurent_at(g, p, m, m)
        for j in range(m):
            terms.append((p, m - j, complex(c[j])))
    return terms


def _rising(k: int, n: int) -> int:
    out = 1
    for i in range(n):
        out *= k + i
    return out


def antistable_h2_sq(terms: Sequence[tuple[complex, int, complex]]) -> float:
    """Squared H2 norm of sum r/(s - z)**d with every z in the open RHP.

    Residue double sum: for each term, the (d-1)-th derivative of the mirrored
    stable function sum (-1)**(k-1) conj(r_jk) / (s + conj(z_j))**k at z_i.
    """
    total = 0j
    for zi, d, ri in terms:
        inner = 0j
        n = d - 1
        for zj, k, rj in terms:
            # d^n/ds^n (s+a)^-k = (-1)^n (k)_n (s+a)^-(k+n)
            a = np.conj(zj)
            inner += (-1) ** (k - 1) * np.conj(rj) * (-1) ** n * _rising(k, n) * (zi + a) ** (-(k + n))
        total += ri / math.factorial(n) * inner
    return float(total.real)


def h2_norm_sq_closed(g: RatFn) -> float:
    """(1/2pi) * integral |g(jw)|^2 dw from the stable partial-fraction expansion."""
    if g.is_zero():
        return 0.0
    if not g.is_strictly_proper():
        raise NotStableError("H2 norm needs a strictly proper function", [])
    bad = [p for p in g.pole_list if p.real >= -AXIS_TOL]
    if bad:
        raise NotStableError("H2 norm needs all poles in the open left half-plane", bad)
    # mirror: g(s) = sum r/(s-p)^d  ->  g~(s) = sum (-1)^d conj(r)/(s + conj p)^d
    mirrored = [(-np.conj(p), d, (-1) ** d * np.conj(r)) for p, d, r in partial_fractions(g)]
    return antistable_h2_sq(mirrored)
