"""Command-line front end: perf, sweep, bounds and verify.

Documents go to stdout as JSON, sweeps as CSV; diagnostics go to stderr.
Exit codes: 0 success, 1 verification gap too large, 2 config error,
3 structural infeasibility, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import build_problem, load_document, set_path
from .errors import ConfigError, NcsError
from .h2opt import PerfBreakdown, Problem, h2_cross_sum, solve, synth_controller
from .oracle import RitzConfig, evaluate_noise_cost, h2_norm_sq_quad, mirrored, reference_cost, ritz_min_j
from .power import feasibility_check, min_power_bounds
from .quadrature import DEFAULT_RTOL
from .ratfun import RatFn

log = logging.getLogger("ncsperf")

BREAKDOWN_FIELDS = [
    "term_zero_sum", "term_g1", "term_g2", "term_g3",
    "term_residual", "term_upsilon", "term_power", "total",
]
VERIFY_GAP_LIMIT = 0.02
EXIT_GAP = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _cplx(z) -> float | list[float]:
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _ratfn_doc(g: RatFn | None):
    if g is None:
        return None
    return {"num": [_cplx(c) for c in g.num.coeffs], "poles": [_cplx(p) for p in g.pole_list]}


def _roots_doc(rs):
    return [{"value": _cplx(p), "multiplicity": m} for p, m in rs]


def relative_gap(j_approx: float, bd: PerfBreakdown) -> float:
    """(j_approx - J*) relative to the cost part of J* (the power offset excluded)."""
    cost = bd.total - bd.term_power
    diff = j_approx - bd.total
    return diff / cost if cost > 0 else diff


# commands -------------------------------------------------------------------

def cmd_perf(prob: Problem, rtol: float = DEFAULT_RTOL) -> dict:
    sol = solve(prob, rtol)
    bd, b = sol.breakdown, sol.bundle
    ctrl = synth_controller(prob, b, sol.gammas, strict=False)
    for issue in ctrl.issues:
        log.warning("controller: %s", issue)
    bounds = min_power_bounds(prob, b, sol.gammas, ctrl, rtol)
    feas = feasibility_check(prob, bounds)
    for name, rep in feas.items():
        if not rep.feasible:
            log.warning("channel %s power budget %.6g is below the bound %.6g", name, rep.budget, rep.required)
    w = np.linspace(-50, 50, 101)
    return {
        "breakdown": bd.as_dict(),
        "controller": {
            "Q": _ratfn_doc(ctrl.Q), "R": _ratfn_doc(ctrl.R),
            "K1": _ratfn_doc(ctrl.K1), "K2": _ratfn_doc(ctrl.K2), "S": _ratfn_doc(ctrl.S),
            "issues": list(ctrl.issues),
        },
        "diagnostics": {
            "nmp_zeros": _roots_doc(b.nmp_zeros),
            "unstable_poles": _roots_doc(b.unstable_poles),
            "bezout_residual": b.coprime.bezout_residual(w),
            "omega_degenerate": b.omega.degenerate,
            "delta_degenerate": b.delta.degenerate,
            "lambda_degenerate": b.lam.degenerate,
            "upsilon1": sol.upsilon1,
            "power_feasible": {k: v.feasible for k, v in feas.items()},
        },
    }


def cmd_bounds(prob: Problem, rtol: float = DEFAULT_RTOL) -> dict:
    sol = solve(prob, rtol)
    ctrl = synth_controller(prob, sol.bundle, sol.gammas, strict=False)
    bounds = min_power_bounds(prob, sol.bundle, sol.gammas, ctrl, rtol)
    feas = feasibility_check(prob, bounds)
    return {
        "y_coeffs": {"sigma_r2": bounds.y_coeffs[0], "sigma1_2": bounds.y_coeffs[1], "sigma2_2": bounds.y_coeffs[2]},
        "u_coeffs": {"sigma_r2": bounds.u_coeffs[0], "sigma1_2": bounds.u_coeffs[1], "sigma2_2": bounds.u_coeffs[2]},
        "feasibility": {
            k: {"budget": v.budget, "required": v.required, "feasible": v.feasible, "margin": v.margin}
            for k, v in feas.items()
        },
        "controller_issues": list(ctrl.issues),
    }


def _cross_check(closed: float, quad: float) -> dict:
    rel = abs(closed - quad) / max(abs(closed), abs(quad), 1e-300)
    return {"closed_form": closed, "quadrature": quad, "rel_diff": rel}


def cmd_verify(prob: Problem, order: int = 12, rtol: float = DEFAULT_RTOL) -> dict:
    sol = solve(prob, rtol)
    bd, gam = sol.breakdown, sol.gammas
    ritz = ritz_min_j(prob, RitzConfig(basis_order=order), rtol)
    checks: dict = {}
    for name, terms in (("term_g1", gam.g1_terms), ("term_g2", gam.g2_terms), ("term_g3", gam.g3_terms)):
        if not terms:
            checks[name] = "skipped"
        else:
            checks[name] = _cross_check(h2_cross_sum(terms), h2_norm_sq_quad(mirrored(terms), rtol))
    checks["reference"] = _cross_check(bd.term_zero_sum + bd.term_upsilon, reference_cost(prob, rtol))
    noise = bd.term_g1 + bd.term_g2 + bd.term_g3 + bd.term_residual
    ctrl = synth_controller(prob, sol.bundle, gam, strict=False)
    if ctrl.R.in_rh_inf():
        checks["noise_at_R"] = _cross_check(noise, evaluate_noise_cost(prob, ctrl.R, rtol))
    else:
        checks["noise_at_R"] = "skipped: optimal R is not in RH-infinity"
    gap = relative_gap(ritz.j_approx, bd)
    return {
        "j_star": bd.total,
        "j_approx": ritz.j_approx,
        "relative_gap": gap,
        "ritz_order": order,
        "ritz_condition": ritz.cond,
        "lower_bound_ok": bool(ritz.j_approx >= bd.total - 1e-8),
        "cross_checks": checks,
        "ok": bool(gap <= VERIFY_GAP_LIMIT and ritz.j_approx >= bd.total - 1e-8),
    }


# sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxis:
    path: str
    start: float
    stop: float
    steps: int
    scale: str = "linear"

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise ConfigError(f"axis {text!r} must be path:from:to:steps[:log]")
        path = parts[0]
        try:
            start, stop, steps = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ConfigError(f"axis {text!r}: bad number") from exc
        scale = "linear"
        if len(parts) == 5:
            if parts[4] not in ("log", "linear"):
                raise ConfigError(f"axis {text!r}: scale must be 'log' or 'linear'")
            scale = parts[4]
        if steps < 2:
            raise ConfigError(f"axis {text!r}: steps must be at least 2")
        if scale == "log" and (start <= 0 or stop <= 0):
            raise ConfigError(f"axis {text!r}: log scale needs positive bounds")
        return cls(path, start, stop, steps, scale)

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


def _sweep_point(args) -> tuple[list[float] | None, str]:
    doc, assignments, fields, rtol = args
    try:
        for path, value in assignments:
            doc = set_path(doc, path, float(value))
        bd = solve(build_problem(doc), rtol).breakdown.as_dict()
        return [bd[f] for f in fields], ""
    except NcsError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(doc: dict, axes: list[SweepAxis], fields: list[str], rtol: float = DEFAULT_RTOL, jobs: int = 1) -> str:
    if not 1 <= len(axes) <= 2:
        raise ConfigError("a sweep takes one or two axes")
    bad = [f for f in fields if f not in BREAKDOWN_FIELDS]
    if bad:
        raise ConfigError(f"unknown fields {bad}; choose from {BREAKDOWN_FIELDS}")
    for ax in axes:  # fail fast on a bad path before evaluating anything
        set_path(doc, ax.path, ax.start)
    grids = [ax.values() for ax in axes]
    points = [(a,) for a in grids[0]] if len(axes) == 1 else [(a, b) for a in grids[0] for b in grids[1]]
    tasks = [(doc, list(zip([ax.path for ax in axes], pt)), fields, rtol) for pt in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([ax.path for ax in axes] + fields + ["error"])
    for pt, (vals, err) in zip(points, results):
        row = [_fmt(v) for v in pt]
        row += [_fmt(v) for v in vals] if vals is not None else [""] * len(fields)
        w.writerow(row + [err])
    return buf.getvalue()


# entry point ----------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncsperf", description="Optimal tracking performance of two-channel networked control loops")
    ap.add_argument("--tol", type=float, default=DEFAULT_RTOL, help="relative quadrature tolerance")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("perf", help="optimal index breakdown, controller and diagnostics")
    p.add_argument("config")
    p = sub.add_parser("bounds", help="minimum channel input-power bounds")
    p.add_argument("config")
    p = sub.add_parser("verify", help="compare the closed form with the Ritz oracle")
    p.add_argument("config")
    p.add_argument("--order", type=int, default=12)
    p = sub.add_parser("sweep", help="CSV grid of breakdown fields over one or two config leaves")
    p.add_argument("config")
    p.add_argument("--axis", action="append", required=True, help="path:from:to:steps[:log]")
    p.add_argument("--fields", default="total", help="comma-separated breakdown fields")
    p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s: %(message)s")
    if not (args.tol > 0 and math.isfinite(args.tol)):
        print("error: --tol must be a positive number", file=sys.stderr)
        return ConfigError.exit_code
    try:
        doc = load_document(args.config)
        if args.command == "sweep":
            axes = [SweepAxis.parse(a) for a in args.axis]
            fields = [f.strip() for f in args.fields.split(",") if f.strip()]
            sys.stdout.write(cmd_sweep(doc, axes, fields, args.tol, args.jobs))
            return 0
        prob = build_problem(doc)
        if args.command == "perf":
            out = cmd_perf(prob, args.tol)
        elif args.command == "bounds":
            out = cmd_bounds(prob, args.tol)
        else:
            if args.order < 0:
                raise ConfigError("--order must be nonnegative")
            out = cmd_verify(prob, args.order, args.tol)
        json.dump(out, sys.stdout, indent=2)
        sys.stdout.write("\n")
        if args.command == "verify" and not out["ok"]:
            print(f"verification failed: relative gap {out['relative_gap']:.3g}", file=sys.stderr)
            return EXIT_GAP
        return 0
    except NcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
