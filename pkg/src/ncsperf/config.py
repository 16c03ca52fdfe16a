"""Configuration documents (YAML or JSON) and their translation into a Problem.

Layout::

    params: {k: 3, p: 2}            # optional named values
    plant: {num: ["-k", 1], den: ["-p", "1 - p", 1]}
    channel_down: {f_num: [1], f_den: [1], h_num: [0], h_den: [1], sigma: 0}
    channel_up:   {f_num: [0.5], f_den: [0.5, 1], h_num: [0.5], h_den: [-0.5, 1], sigma: 0.1}
    weights: {eps1: 0.5, eps2: 0, eps3: 0.5}
    power: {gamma_u: 1, gamma_y: 2.5}
    reference: {sigma_r: 0.2}

Coefficient arrays are ascending in powers of s.  Any numeric leaf may be a
string holding an arithmetic expression over the names in ``params``.
"""
from __future__ import annotations

import ast
import copy
import math
import operator
from pathlib import Path

import yaml

from .errors import ConfigError
from .h2opt import Channel, Problem
from .ratfun import Poly, RatFn

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_expr(text: str, names: dict) -> float:
    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown parameter {node.id!r} in {text!r}")
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}") from exc
    return walk(tree)


def load_document(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    return doc


def _section(doc: dict, key: str) -> dict:
    sec = doc.get(key)
    if not isinstance(sec, dict):
        raise ConfigError(f"missing section {key!r}")
    return sec


def _number(value, names: dict, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        x = _eval_expr(value, names)
    else:
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    if not math.isfinite(x):
        raise ConfigError(f"{where}: value is not finite")
    return x


def _coeffs(sec: dict, key: str, names: dict, where: str, default=None) -> list[float]:
    raw = sec.get(key, default)
    if raw is None:
        raise ConfigError(f"missing {where}.{key}")
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}.{key} must be a non-empty coefficient array")
    return [_number(v, names, f"{where}.{key}[{i}]") for i, v in enumerate(raw)]


def _ratfn(num: list[float], den: list[float], where: str) -> RatFn:
    if all(c == 0 for c in den):
        raise ConfigError(f"{where}: denominator is identically zero")
    try:
        return RatFn.from_polys(Poly(num), Poly(den))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _channel(sec: dict, names: dict, where: str) -> Channel:
    F = _ratfn(_coeffs(sec, "f_num", names, where, [1]), _coeffs(sec, "f_den", names, where, [1]), f"{where}.F")
    H = _ratfn(_coeffs(sec, "h_num", names, where, [0]), _coeffs(sec, "h_den", names, where, [1]), f"{where}.H")
    return Channel(F, H, _number(sec.get("sigma", 0.0), names, f"{where}.sigma"))


def build_problem(doc: dict) -> Problem:
    params = doc.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")
    names = {str(k): _number(v, {}, f"params.{k}") for k, v in params.items()}
    plant = _section(doc, "plant")
    w = doc.get("weights", {}) or {}
    pw = doc.get("power", {}) or {}
    ref = doc.get("reference", {}) or {}
    try:
        return Problem(
            plant_num=Poly(_coeffs(plant, "num", names, "plant")),
            plant_den=Poly(_coeffs(plant, "den", names, "plant")),
            down=_channel(doc.get("channel_down", {}) or {}, names, "channel_down"),
            up=_channel(doc.get("channel_up", {}) or {}, names, "channel_up"),
            eps1=_number(w.get("eps1", 1.0), names, "weights.eps1"),
            eps2=_number(w.get("eps2", 0.0), names, "weights.eps2"),
            eps3=_number(w.get("eps3", 0.0), names, "weights.eps3"),
            gamma_u=_number(pw.get("gamma_u", 1.0), names, "power.gamma_u"),
            gamma_y=_number(pw.get("gamma_y", 1.0), names, "power.gamma_y"),
            sigma_r=_number(ref.get("sigma_r", 0.0), names, "reference.sigma_r"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_problem(path) -> Problem:
    return build_problem(load_document(path))


def set_path(doc: dict, path: str, value: float) -> dict:
    """Copy of ``doc`` with the numeric leaf at dotted ``path`` replaced."""
    out = copy.deepcopy(doc)
    keys = path.split(".")
    node = out
    for i, k in enumerate(keys[:-1]):
        node = _child(node, k, ".".join(keys[: i + 1]))
    last = keys[-1]
    if isinstance(node, list):
        idx = _index(node, last, path)
        old = node[idx]
        node[idx] = value
    elif isinstance(node, dict):
        if last not in node:
            raise ConfigError(f"sweep path {path!r} does not exist")
        old = node[last]
        node[last] = value
    else:
        raise ConfigError(f"sweep path {path!r} does not address a config leaf")
    if isinstance(old, (dict, list)) or isinstance(old, bool):
        raise ConfigError(f"sweep path {path!r} is not a numeric leaf")
    return out


def _index(node: list, key: str, path: str) -> int:
    try:
        idx = int(key)
    except ValueError as exc:
        raise ConfigError(f"sweep path {path!r}: {key!r} is not an array index") from exc
    if not -len(node) <= idx < len(node):
        raise ConfigError(f"sweep path {path!r}: index {idx} out of range")
    return idx


def _child(node, key: str, where: str):
    if isinstance(node, dict):
        if key not in node:
            raise ConfigError(f"sweep path {where!r} does not exist")
        return node[key]
    if isinstance(node, list):
        return node[_index(node, key, where)]
    raise ConfigError(f"sweep path {where!r} does not exist")
