"""Adaptive frequency-axis quadrature under the substitution w = tan(theta)."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate

from .errors import NumericFailure

DEFAULT_RTOL = 1e-9


def axis_integral(f, rtol: float = DEFAULT_RTOL, atol: float = 1e-14, symmetric: bool = False) -> float:
    """(1/2pi) * integral over the real line of f(w) dw.

    ``f`` takes a scalar frequency and returns a real number.  With
    ``symmetric`` the integrand is assumed even in w and only [0, inf) is used.
    """

    def g(theta):
        c = np.cos(theta)
        if c == 0.0:
            return 0.0
        return f(np.tan(theta)) / (c * c)

    total = 0.0
    err = 0.0
    spans = [(0.0, np.pi / 2)] if symmetric else [(-np.pi / 2, 0.0), (0.0, np.pi / 2)]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for a, b in spans:
            try:
                val, e = integrate.quad(g, a, b, epsabs=atol, epsrel=rtol, limit=400)
            except integrate.IntegrationWarning as exc:
                raise NumericFailure(f"frequency quadrature did not converge: {exc}") from exc
            total += val
            err += e
    if symmetric:
        total *= 2.0
        err *= 2.0
    if not np.isfinite(total):
        raise NumericFailure("frequency quadrature diverged")
    return total / (2.0 * np.pi)


def gauss_axis_nodes(n: int = 2049):
    """Nodes w_k and weights c_k with sum c_k f(w_k) ~ (1/2pi) int f(w) dw."""
    x, wts = np.polynomial.legendre.leggauss(n)
    theta = x * (np.pi / 2)
    omega = np.tan(theta)
    weights = wts * (np.pi / 2) / np.cos(theta) ** 2 / (2.0 * np.pi)
    return omega, weights
