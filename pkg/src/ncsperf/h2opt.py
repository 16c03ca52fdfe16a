"""Optimal tracking performance and the optimal two-parameter controller.

The index splits into a noise part, minimised over the Youla parameter R, and
a reference part, minimised over Q.  The noise part is an H2 model-matching
problem solved through antistable projections and two inner-outer
factorizations; the reference part reduces to the right half-plane zeros of
the plant and of the down-link channel plus a frequency integral (upsilon).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateError, PerformanceUnbounded, SynthesisError, UnstabilizableError
from .factor import CoprimeData, ColumnTF, InnerOuter, blaschke, coprime_mirrored, min_phase_split, spectral_outer
from .quadrature import DEFAULT_RTOL, axis_integral
from .ratfun import (
    AXIS_TOL,
    Poly,
    RatFn,
    RootSet,
    _from_roots,
    antistable_h2_sq,
    laurent_at,
    poly_roots,
    rf_para_conjugate,
)

CANCEL_GAP = 1e-6


@dataclass(frozen=True)
class Channel:
    F: RatFn
    H: RatFn
    sigma: float = 0.0


@dataclass(frozen=True)
class Problem:
    """Plant, both channels, weights, power budgets and reference variance.

    The plant is kept as raw numerator/denominator polynomials so that exact
    pole-zero cancellations are still visible to the structural checks.
    """

    plant_num: Poly
    plant_den: Poly
    down: Channel
    up: Channel
    eps1: float = 1.0
    eps2: float = 0.0
    eps3: float = 0.0
    gamma_u: float = 1.0
    gamma_y: float = 1.0
    sigma_r: float = 1.0

    def __post_init__(self):
        if self.plant_den.is_zero() or self.plant_num.is_zero():
            raise ValueError("plant numerator and denominator must be nonzero")
        if self.plant_num.degree >= self.plant_den.degree:
            raise ValueError("plant must be strictly proper")
        if not self.eps1 > 0:
            raise ValueError("eps1 must be positive")
        if self.eps2 < 0 or self.eps3 < 0:
            raise ValueError("eps2 and eps3 must be nonnegative")
        if not (self.gamma_u > 0 and self.gamma_y > 0):
            raise ValueError("power budgets must be positive")
        for name, v in (("sigma_r", self.sigma_r), ("sigma1", self.down.sigma), ("sigma2", self.up.sigma)):
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"{name} must be a nonnegative number")
        for name, ch in (("down-link", self.down), ("up-link", self.up)):
            if not ch.F.in_rh_inf():
                raise ValueError(f"{name} channel filter F must be stable and proper")
            if ch.F.is_zero():
                raise ValueError(f"{name} channel filter F must be nonzero")
            if not ch.H.is_zero() and not ch.H.is_strictly_proper():
                raise ValueError(f"{name} noise coloring H must be strictly proper")

    @property
    def plant(self) -> RatFn:
        return RatFn.from_polys(self.plant_num, self.plant_den)


@dataclass(frozen=True)
class ResidueTerm:
    pole: complex
    order: int
    coeff: complex

    def __post_init__(self):
        if not self.pole.real > AXIS_TOL:
            raise ValueError(f"residue term pole {self.pole} is not in the open right half-plane")

    def as_ratfn(self) -> RatFn:
        return RatFn([self.coeff], [self.pole] * self.order)


@dataclass
class FactorizationBundle:
    coprime: CoprimeData
    L: RatFn
    B: RatFn
    N_hat: RatFn
    N0: RatFn
    Nm: RatFn
    Mm: RatFn
    F10: RatFn
    F20: RatFn
    Lg: RatFn
    Lf1: RatFn
    Lf2: RatFn
    H1: RatFn
    H2: RatFn
    omega_col: ColumnTF
    omega: InnerOuter
    delta_col: ColumnTF
    delta: InnerOuter
    lambda_col: ColumnTF
    lam: InnerOuter
    nmp_zeros: RootSet  # zeros of L: plant, F1 and F2 together
    unstable_poles: RootSet


@dataclass
class Gammas:
    a: RatFn  # noise weight sigma1*sqrt(eps1+eps3)*N0*H1
    g1_terms: list
    g1_stable: RatFn
    g2_terms: list
    g2_stable: RatFn
    g3_terms: list
    g3_stable: RatFn


@dataclass(frozen=True)
class PerfBreakdown:
    term_zero_sum: float
    term_g1: float
    term_g2: float
    term_g3: float
    term_residual: float
    term_upsilon: float
    term_power: float
    total: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.total):
            object.__setattr__(self, "total", sum(self.terms()))

    def terms(self) -> list[float]:
        return [
            self.term_zero_sum,
            self.term_g1,
            self.term_g2,
            self.term_g3,
            self.term_residual,
            self.term_upsilon,
            self.term_power,
        ]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ControllerPair:
    Q: RatFn
    R: RatFn
    K1: RatFn | None
    K2: RatFn
    S: RatFn
    issues: tuple[str, ...] = ()


def canonical_filter(h: RatFn) -> RatFn:
    """Stable minimum-phase function with the same axis magnitude as h."""
    if h.is_zero():
        return h
    poles = [p if p.real < 0 else -np.conj(p) for p in h.pole_list]
    zeros = [z if z.real <= 0 else -np.conj(z) for z in h.zeros().expanded()]
    if any(abs(p.real) <= AXIS_TOL for p in poles):
        raise DegenerateError("noise coloring has a pole on the imaginary axis")
    return RatFn(_from_roots(zeros) * h.num.lead, poles)


def _rhp_roots(p: Poly) -> list[complex]:
    if p.degree <= 0:
        return []
    return [z for z in poly_roots(p, 1e-6).expanded() if z.real > AXIS_TOL]


def check_cancellation(prob: Problem) -> None:
    """Raise when a right half-plane pole of P meets a zero of P, F1 or F2."""
    poles = _rhp_roots(prob.plant_den)
    zeros = _rhp_roots(prob.plant_num)
    for f in (prob.down.F, prob.up.F):
        zeros += [z for z in f.zeros().expanded() if z.real > AXIS_TOL]
    for p in poles:
        for z in zeros:
            if abs(z - p) < CANCEL_GAP * max(1.0, abs(z)):
                raise PerformanceUnbounded(z, p)


def build_bundle(prob: Problem) -> FactorizationBundle:
    check_cancellation(prob)
    P = prob.plant
    F1, F2 = prob.down.F, prob.up.F
    H1, H2 = canonical_filter(prob.down.H), canonical_filter(prob.up.H)
    G = F2 * P * F1
    cop = coprime_mirrored(G)
    N, M = cop.N, cop.M
    N_hat = P * M
    if not N_hat.is_stable():
        raise UnstabilizableError(complex("nan"), complex(N_hat.pole_list[np.argmax(N_hat.pole_list.real)]))
    Lg, N0 = min_phase_split(N_hat)
    Lf1, F10 = min_phase_split(F1)
    Lf2, F20 = min_phase_split(F2)
    L = Lg * Lf1 * Lf2
    Nm = F10 * F20 * N0
    mzeros = M.zeros()
    unstable = mzeros.rhp()
    if len(mzeros.on_axis()):
        raise DegenerateError("plant has poles on the imaginary axis")
    B = blaschke(unstable)
    Mm = RatFn(_from_roots(mzeros.lhp().expanded() + [-np.conj(z) for z in unstable.expanded()]) * M.num.lead, M.pole_list)

    s1, s2 = prob.down.sigma, prob.up.sigma
    e1, e2, e3 = prob.eps1, prob.eps2, prob.eps3
    omega_col = ColumnTF(
        [
            (F10 * N0 * H2).scale(s2 * math.sqrt(e1 + e3)),
            (F20 * N0 * H1).scale(s1 * math.sqrt(e2)),
            (Mm * H2).scale(s2 * math.sqrt(e2)),
        ]
    )
    try:
        omega = spectral_outer(omega_col)
    except DegenerateError as exc:
        raise DegenerateError(f"omega stack: {exc}") from exc
    delta_col = ColumnTF([(N0 * H1 * Nm).scale(s1 * math.sqrt(e1 + e3)), omega.outer * Mm])
    try:
        delta = spectral_outer(delta_col)
    except DegenerateError as exc:
        raise DegenerateError(f"delta stack: {exc}") from exc
    lambda_col = ColumnTF(
        [(F10 * N0).scale(-math.sqrt(e1)), Mm.scale(math.sqrt(e2)), (F10 * N0).scale(math.sqrt(e3))]
    )
    try:
        lam = spectral_outer(lambda_col)
    except DegenerateError as exc:
        raise DegenerateError(f"lambda stack: {exc}") from exc
    nmp = RootSet.from_points(
        [z for g in (Lg, Lf1, Lf2) for z in g.zeros().expanded()] if not L.is_zero() else [], 1e-6
    )
    return FactorizationBundle(
        coprime=cop, L=L, B=B, N_hat=N_hat, N0=N0, Nm=Nm, Mm=Mm, F10=F10, F20=F20,
        Lg=Lg, Lf1=Lf1, Lf2=Lf2, H1=H1, H2=H2,
        omega_col=omega_col, omega=omega, delta_col=delta_col, delta=delta,
        lambda_col=lambda_col, lam=lam, nmp_zeros=nmp, unstable_poles=unstable,
    )


def antistable_project(f: RatFn, rhp_poles: RootSet) -> tuple[list[ResidueTerm], RatFn]:
    """Split f into sum r/(s - z)**d over its RHP poles plus a stable remainder."""
    actual = f.poles(1e-6).rhp()
    declared = {(round(p.real, 5), round(p.imag, 5), m) for p, m in rhp_poles}
    found = {(round(p.real, 5), round(p.imag, 5), m) for p, m in actual}
    if f.is_zero():
        return [], f
    if declared != found:
        raise ValueError(f"declared RHP poles {rhp_poles} differ from actual {actual}")
    terms = []
    for z, m in actual:
        c = laurent_at(f, z, m, m)
        for j in range(m):
            if c[j] != 0:
                terms.append(ResidueTerm(z, m - j, complex(c[j])))
    # stable part by exact polynomial division: (n - A*d_s) / d_u
    all_poles = list(f.pole_list)
    unstable_list = [p for p, m in actual for _ in range(m)]
    stable_list = list(all_poles)
    for p in unstable_list:
        i = int(np.argmin(np.abs(np.array(stable_list) - p)))
        stable_list.pop(i)
    du = _from_roots(unstable_list)
    a_num = np.zeros(1, dtype=complex)
    for t in terms:
        rest = list(unstable_list)
        for _ in range(t.order):
            i = int(np.argmin(np.abs(np.array(rest) - t.pole)))
            rest.pop(i)
        piece = _from_roots(rest) * t.coeff
        a_num = np.polynomial.polynomial.polyadd(a_num, piece)
    num = np.polynomial.polynomial.polysub(f.num.coeffs, np.convolve(a_num, _from_roots(stable_list)))
    quot, _rem = np.polynomial.polynomial.polydiv(num, du)
    return terms, RatFn(quot, stable_list)


def h2_cross_sum(terms) -> float:
    """Squared H2 norm of a sum of antistable residue terms (closed-form double sum)."""
    tl = []
    for t in terms:
        if not isinstance(t, ResidueTerm):
            t = ResidueTerm(*t)
        tl.append((t.pole, t.order, t.coeff))
    return antistable_h2_sq(tl)


def compute_gammas(prob: Problem, bundle: FactorizationBundle) -> Gammas:
    cop = bundle.coprime
    a = (bundle.N0 * bundle.H1).scale(prob.down.sigma * math.sqrt(prob.eps1 + prob.eps3))
    if a.is_zero():
        g1_terms, g1 = [], RatFn.const(0.0)
    else:
        f1 = a * cop.X / bundle.L
        g1_terms, g1 = antistable_project(f1, f1.poles(1e-6).rhp())
    if bundle.omega.degenerate:
        g2_terms, g2 = [], RatFn.const(0.0)
    else:
        f2 = bundle.omega.outer * cop.Y / bundle.B
        g2_terms, g2 = antistable_project(f2, f2.poles(1e-6).rhp())
    if bundle.delta.degenerate or (g1.is_zero() and g2.is_zero()):
        g3_terms, g3 = [], RatFn.const(0.0)
    else:
        # project each inner~ * G piece separately; pieces share the mirrored
        # zeros of the outer factor, so their residue terms add up exactly
        acc: dict[tuple[complex, int], complex] = {}
        g3 = RatFn.const(0.0)
        for inner_row, g in zip(bundle.delta.inner, (g1, g2)):
            if inner_row.is_zero() or g.is_zero():
                continue
            piece = rf_para_conjugate(inner_row) * g
            terms, stable = antistable_project(piece, piece.poles(1e-6).rhp())
            g3 = g3 + stable
            for t in terms:
                key = min(acc, key=lambda k: abs(k[0] - t.pole) + 10 * abs(k[1] - t.order), default=None)
                if key is not None and key[1] == t.order and abs(key[0] - t.pole) <= 1e-6 * max(1.0, abs(t.pole)):
                    acc[key] += t.coeff
                else:
                    acc[(t.pole, t.order)] = t.coeff
        g3_terms = [ResidueTerm(p, d, c) for (p, d), c in acc.items() if c != 0]
    return Gammas(a, g1_terms, g1, g2_terms, g2, g3_terms, g3)


def residual_term(bundle: FactorizationBundle, gam: Gammas, rtol: float = DEFAULT_RTOL) -> float:
    """Squared norm of the part of [G1; G2] orthogonal to the delta inner column."""
    if gam.g1_stable.is_zero() and gam.g2_stable.is_zero():
        return 0.0
    rows = bundle.delta_col.rows
    g1, g2 = gam.g1_stable, gam.g2_stable

    def f(w):
        # |v|^2 - |d^H v|^2/|d|^2 == |d1 v2 - d2 v1|^2/|d|^2 for 2-vectors, free of cancellation
        s = 1j * w
        v1, v2 = g1(s), g2(s)
        d1, d2 = rows[0](s), rows[1](s)
        dd = abs(d1) ** 2 + abs(d2) ** 2
        if dd == 0.0:
            return abs(v1) ** 2 + abs(v2) ** 2
        return float(abs(d1 * v2 - d2 * v1) ** 2 / dd)

    return axis_integral(f, rtol=rtol)


def _inner_limits(col: ColumnTF, outer: RatFn) -> np.ndarray:
    rd_out = outer.relative_degree
    lead_out = outer.num.lead
    out = []
    for r in col:
        if r.is_zero() or r.relative_degree > rd_out:
            out.append(0j)
        else:
            out.append(r.num.lead / lead_out)
    return np.array(out)


def compute_upsilon1(prob: Problem, bundle: FactorizationBundle, rtol: float = DEFAULT_RTOL) -> float:
    """Residual of the reference channel after the optimal frequency-wise projection.

    The pointwise residual vector sqrt(eps1)*(e1 - li * conj(li_1)), li the
    inner column of the lambda stack, tends to a constant as w -> inf whenever
    eps2 or eps3 is positive.  That constant is the same for every admissible
    design and has infinite energy, so it is removed before integrating.
    """
    lam = bundle.lam
    col = bundle.lambda_col
    se1 = math.sqrt(prob.eps1)
    li_inf = _inner_limits(col, lam.outer)
    v_inf = -se1 * li_inf * np.conj(li_inf[0])
    v_inf[0] += se1
    rows = col.rows
    outer = lam.outer

    def f(w):
        s = 1j * w
        o = outer(s)
        li = np.array([r(s) for r in rows]) / o
        v = -se1 * li * np.conj(li[0])
        v[0] += se1
        d = v - v_inf
        return float(np.vdot(d, d).real)

    if prob.eps2 == 0 and prob.eps3 == 0:
        return 0.0
    return axis_integral(f, rtol=rtol)


def zero_sum(prob: Problem, bundle: FactorizationBundle) -> float:
    zs = [z for g in (bundle.Lg, bundle.Lf1) for z in g.zeros().expanded()]
    return 2.0 * prob.eps1 * prob.sigma_r**2 * float(sum(z.real for z in zs))


@dataclass
class Solution:
    problem: Problem
    bundle: FactorizationBundle
    gammas: Gammas
    breakdown: PerfBreakdown
    upsilon1: float


def solve(prob: Problem, rtol: float = DEFAULT_RTOL) -> Solution:
    bundle = build_bundle(prob)
    gam = compute_gammas(prob, bundle)
    ups = compute_upsilon1(prob, bundle, rtol)
    bd = PerfBreakdown(
        term_zero_sum=zero_sum(prob, bundle),
        term_g1=h2_cross_sum(gam.g1_terms),
        term_g2=h2_cross_sum(gam.g2_terms),
        term_g3=h2_cross_sum(gam.g3_terms),
        term_residual=residual_term(bundle, gam, rtol),
        term_upsilon=prob.sigma_r**2 * ups,
        term_power=0.0 - (prob.eps2 * prob.gamma_u + prob.eps3 * prob.gamma_y),
    )
    return Solution(prob, bundle, gam, bd, ups)


def compute_jstar(prob: Problem, rtol: float = DEFAULT_RTOL) -> PerfBreakdown:
    return solve(prob, rtol).breakdown


def optimal_q(prob: Problem, bundle: FactorizationBundle) -> RatFn:
    """eps1 * (F10 N0)~ / (Lambda0~ Lambda0), the frequency-wise optimal Q."""
    lam0 = bundle.lam.outer
    g = bundle.F10 * bundle.N0
    return rf_para_conjugate(g).scale(prob.eps1) / (rf_para_conjugate(lam0) * lam0)


def synth_controller(prob: Problem, bundle: FactorizationBundle, gam: Gammas, strict: bool = True) -> ControllerPair:
    cop = bundle.coprime
    if bundle.delta.degenerate or gam.g3_stable.is_zero():
        R = RatFn.const(0.0)
    else:
        R = gam.g3_stable / bundle.delta.outer
    issues = []
    if not R.in_rh_inf():
        msg = "improper" if not R.is_proper() else "unstable"
        if strict:
            raise SynthesisError("R", msg)
        issues.append(f"R {msg}")
    Q = optimal_q(prob, bundle)
    if not Q.is_proper():
        if strict:
            raise SynthesisError("Q", "improper")
        issues.append("Q improper")
    if not Q.is_stable():
        if strict:
            raise SynthesisError("Q", "unstable")
        issues.append("Q unstable")
    xr = cop.X - R * cop.N
    if xr.is_zero():
        raise SynthesisError("X-RN", "identically zero")
    S = cop.M * xr
    K2 = (cop.Y - R * cop.M) / xr
    K1 = Q / xr
    return ControllerPair(Q=Q, R=R, K1=K1, K2=K2, S=S, issues=tuple(issues))
