"""Independent numerical checks: frequency quadrature and Ritz minimisation.

Nothing here uses the residue formulas or the spectral factors of the
closed-form route.  The noise part of the index is minimised directly over a
finite stable basis for R; the reference part is minimised frequency by
frequency from raw transfer-function values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFailure
from .factor import ColumnTF
from .h2opt import Problem, build_bundle
from .quadrature import DEFAULT_RTOL, axis_integral, gauss_axis_nodes
from .ratfun import RatFn

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RitzConfig:
    basis_order: int = 12
    basis_pole: float = 1.0
    freq_grid: int = 2049
    # "geometric": 1/(s + a*ratio**(k-1)); "laguerre": 1/(s + a)**k
    kind: str = "geometric"
    ratio: float = 2.0

    def __post_init__(self):
        if self.basis_order < 0:
            raise ValueError("basis_order must be nonnegative")
        if not self.basis_pole > 0:
            raise ValueError("basis_pole must be positive")
        if self.freq_grid < 16:
            raise ValueError("freq_grid too small")
        if self.kind not in ("geometric", "laguerre"):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    def basis_values(self, s: np.ndarray) -> np.ndarray:
        n, a = self.basis_order, self.basis_pole
        if n == 0:
            return np.zeros((len(s), 0), dtype=complex)
        if self.kind == "laguerre":
            return np.stack([(s + a) ** (-k) for k in range(1, n + 1)], axis=1)
        return np.stack([1.0 / (s + a * self.ratio**k) for k in range(n)], axis=1)


@dataclass
class RitzResult:
    j_approx: float
    coefficients: np.ndarray
    j_noise: float
    j_reference: float
    offset: float
    cond: float = field(default=float("nan"))


def h2_norm_sq_quad(g, rtol: float = DEFAULT_RTOL) -> float:
    """(1/2pi) * int sum_rows |g_row(jw)|^2 dw by adaptive quadrature."""
    rows = list(g.rows) if isinstance(g, ColumnTF) else [g]
    live = [r for r in rows if not r.is_zero()]
    if not live:
        return 0.0
    for r in live:
        if not r.is_strictly_proper():
            raise NumericFailure("integrand does not decay: row is not strictly proper")
        if np.any(np.abs(r.pole_list.real) <= 1e-12):
            raise NumericFailure("row has a pole on the imaginary axis")

    def f(w):
        s = 1j * w
        return float(sum(abs(r(s)) ** 2 for r in live))

    return axis_integral(f, rtol=rtol)


def mirrored(terms) -> RatFn:
    """Stable function with the same axis magnitude as sum r/(s-z)^d."""
    out = RatFn.const(0.0)
    for t in terms:
        pole, order, coeff = (t.pole, t.order, t.coeff) if hasattr(t, "pole") else t
        out = out + RatFn([(-1) ** order * np.conj(coeff)], [-np.conj(pole)] * order)
    return out


def noise_cost_samples(prob: Problem, s: np.ndarray):
    """Affine pieces t_k(s) - d_k(s) R(s) of every noise-driven output row.

    Built from the coprime factors and raw channel filters: rows are
    sigma1*sqrt(e1+e3)*N_hat*H1*(X - R N), sigma2*sqrt(e1+e3)*F1*N_hat*H2*(Y - R M),
    sigma1*sqrt(e2)*F2*N_hat*H1*(Y - R M), sigma2*sqrt(e2)*M*H2*(Y - R M).
    """
    b = build_bundle(prob)
    cop = b.coprime
    X, Y, N, M = (cop.X(s), cop.Y(s), cop.N(s), cop.M(s))
    nh = b.N_hat(s)
    H1, H2 = prob.down.H(s), prob.up.H(s)
    F1, F2 = prob.down.F(s), prob.up.F(s)
    s1, s2 = prob.down.sigma, prob.up.sigma
    e13, e2 = math.sqrt(prob.eps1 + prob.eps3), math.sqrt(prob.eps2)
    w = [s1 * e13 * nh * H1, s2 * e13 * F1 * nh * H2, s1 * e2 * F2 * nh * H1, s2 * e2 * M * H2]
    targets = [w[0] * X, w[1] * Y, w[2] * Y, w[3] * Y]
    gains = [w[0] * N, w[1] * M, w[2] * M, w[3] * M]
    return targets, gains


def _leading_direction(rows) -> np.ndarray:
    """Unit vector of high-frequency leading coefficients (slowest-decaying rows only)."""
    live = [r.relative_degree for r in rows if not r.is_zero()]
    rd = min(live)
    lead = np.array([r.num.lead if (not r.is_zero() and r.relative_degree == rd) else 0j for r in rows])
    return lead / np.linalg.norm(lead)


def reference_cost(prob: Problem, rtol: float = DEFAULT_RTOL) -> float:
    """Reference part of the optimal index, without the power offsets.

    ||L3^-1 - 1||^2 by quadrature (L3 the all-pass of the NMP zeros of the
    plant and the down-link filter) plus the frequency-wise least-squares
    residual of [sqrt(e1); 0; 0] + lam(jw) q, with its high-frequency limit
    removed.
    """
    b = build_bundle(prob)
    sr2 = prob.sigma_r**2
    if sr2 == 0:
        return 0.0
    L3 = b.Lg * b.Lf1

    def allpass_gap(w):
        return abs(1.0 / L3(1j * w) - 1.0) ** 2

    zero_part = prob.eps1 * axis_integral(allpass_gap, rtol=rtol)
    if prob.eps2 == 0 and prob.eps3 == 0:
        return sr2 * zero_part
    e1 = math.sqrt(prob.eps1)
    g = b.N_hat * prob.down.F / L3
    rows = [g.scale(-e1), b.Mm.scale(math.sqrt(prob.eps2)), g.scale(math.sqrt(prob.eps3))]
    t = np.array([e1, 0, 0], dtype=complex)
    u = _leading_direction(rows)
    r_inf = t - u * np.vdot(u, t)

    def f(w):
        v = np.array([r(1j * w) for r in rows])
        d = t - v * (np.vdot(v, t) / np.vdot(v, v)) - r_inf
        return float(np.vdot(d, d).real)

    return sr2 * (zero_part + axis_integral(f, rtol=rtol))


def ritz_min_noise(prob: Problem, cfg: RitzConfig) -> tuple[float, np.ndarray, float]:
    """Least-squares minimisation of the noise part over R = sum c_k/(s+a)^k."""
    omega, wts = gauss_axis_nodes(cfg.freq_grid)
    s = 1j * omega
    targets, gains = noise_cost_samples(prob, s)
    phi = cfg.basis_values(s)
    sq = np.sqrt(wts)
    rows_t, rows_a = [], []
    for t, g in zip(targets, gains):
        rows_t.append(sq * t)
        rows_a.append((sq * g)[:, None] * phi)
    T = np.concatenate(rows_t)
    A = np.concatenate(rows_a)
    # real coefficients: stack real and imaginary parts
    Tr = np.concatenate([T.real, T.imag])
    Ar = np.concatenate([A.real, A.imag])
    if cfg.basis_order == 0 or not np.any(Ar):
        return float(Tr @ Tr), np.zeros(cfg.basis_order), 1.0
    cond = float(np.linalg.cond(Ar)) if Ar.size else 1.0
    if cond > 1e12:
        log.warning("ill-conditioned Ritz normal equations (cond=%.3g); regularizing", cond)
    sol, *_ = np.linalg.lstsq(Ar, Tr, rcond=1e-14)
    res = Tr - Ar @ sol
    return float(res @ res), sol, cond


def ritz_min_j(prob: Problem, cfg: RitzConfig = RitzConfig(), rtol: float = DEFAULT_RTOL) -> RitzResult:
    jn, coef, cond = ritz_min_noise(prob, cfg)
    jr = reference_cost(prob, rtol)
    off = 0.0 - (prob.eps2 * prob.gamma_u + prob.eps3 * prob.gamma_y)
    return RitzResult(jn + jr + off, coef, jn, jr, off, cond)


def evaluate_noise_cost(prob: Problem, R: RatFn, rtol: float = DEFAULT_RTOL) -> float:
    """Noise part of the index at a given R, by adaptive quadrature."""

    # build factors once; evaluate pointwise through closures
    b = build_bundle(prob)
    cop = b.coprime
    s1, s2 = prob.down.sigma, prob.up.sigma
    e13, e2 = math.sqrt(prob.eps1 + prob.eps3), math.sqrt(prob.eps2)

    def g(w):
        s = 1j * w
        nh = b.N_hat(s)
        H1, H2 = prob.down.H(s), prob.up.H(s)
        F1, F2 = prob.down.F(s), prob.up.F(s)
        r = R(s)
        xr = cop.X(s) - r * cop.N(s)
        yr = cop.Y(s) - r * cop.M(s)
        vals = [
            s1 * e13 * nh * H1 * xr,
            s2 * e13 * F1 * nh * H2 * yr,
            s1 * e2 * F2 * nh * H1 * yr,
            s2 * e2 * cop.M(s) * H2 * yr,
        ]
        return float(sum(abs(v) ** 2 for v in vals))

    return axis_integral(g, rtol=rtol)
