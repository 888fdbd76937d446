"""Run configuration: a YAML document validated into :class:`RunConfig`.

Example::

    domain: {kind: disc, center: [0, 0], radius: 1}
    weight: {tag: abs4}
    grid: {h: 0.0078125}
    solver: {tol: 1.0e-8, seed: 0}
    sweep: {n_list: [1, 4, 16, 64, 256]}
    output: {csv: sweep.csv, json: sweep.json, svg: sweep.svg}

Exactly one command section (``eig``, ``sweep``, ``kato``, ``flux``,
``pcheck``) must be present; it selects what :func:`magspec.cli.run` does.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import InvalidParams, InvalidSpec, ParseError, ValidationError
from .grid import CompactSetSpec, DomainSpec
from .weights import Weight, make_weight

COMMANDS = ("eig", "sweep", "kato", "flux", "pcheck")

DOMAIN_KEYS = {
    "rectangle": {"x0", "x1", "y0", "y1"},
    "disc": {"center", "radius"},
    "annulus": {"center", "r_inner", "r_outer"},
}
WEIGHT_KEYS = {
    "zero": set(),
    "harmonic_log": {"beta", "center"},
    "abs2": {"scale"},
    "abs4": {"scale"},
    "flat_disc": {"r0", "scale"},
    "hol_squares": {"coeffs"},
}
SET_KEYS = {
    "point": {"p"},
    "segment": {"p", "q"},
    "closed_disc": {"center", "radius"},
    "finite_union": {"parts"},
}
SOLVER_KEYS = {"tol", "max_iter", "seed", "block_size", "preconditioner"}
OUTPUT_KEYS = {"csv", "json", "svg", "matrix"}
COMMAND_KEYS = {
    "eig": {"n", "operator"},
    "sweep": {"n_list", "thresh_ratio", "tail_ratio"},
    "kato": {"n"},
    "flux": {"beta", "t_list"},
    "pcheck": {"set", "radii", "h_factor", "thresh_ratio", "tail_ratio"},
}
OPERATORS = ("magnetic", "nonmagnetic", "weighted", "both")
# Sections each command needs besides its own; ``weight`` is optional only where listed.
NEEDS = {
    "eig": ("domain", "weight", "grid"),
    "sweep": ("domain", "weight", "grid"),
    "kato": ("domain", "weight", "grid"),
    "flux": ("domain", "grid"),
    "pcheck": (),
}
TOP_KEYS = {"domain", "weight", "grid", "solver", "output", *COMMANDS}


@dataclass
class RunConfig:
    command: str
    params: dict
    domain: dict | None = None
    weight: dict | None = None
    grid: dict | None = None
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for key in ("domain", "weight", "grid"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.solver:
            out["solver"] = self.solver
        out[self.command] = self.params
        if self.output:
            out["output"] = self.output
        return out

    def domain_spec(self) -> DomainSpec:
        return domain_from_dict(self.domain)

    def weight_obj(self) -> Weight:
        return weight_from_dict(self.weight)

    @property
    def h(self) -> float:
        return float(self.grid["h"])


def serialize(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _num(d: dict, key: str, path: str, *, positive=False, nonneg=False, required=True,
         integer=False):
    if key not in d:
        if required:
            raise ValidationError(f"{path}.{key}", "missing")
        return None
    v = d[key]
    if not _is_num(v) or (integer and not isinstance(v, int)):
        raise ValidationError(f"{path}.{key}", f"expected a finite {'integer' if integer else 'number'}, got {v!r}")
    if positive and not v > 0:
        raise ValidationError(f"{path}.{key}", f"must be positive, got {v!r}")
    if nonneg and not v >= 0:
        raise ValidationError(f"{path}.{key}", f"must be >= 0, got {v!r}")
    return v


def _pair(d: dict, key: str, path: str, default=None):
    if key not in d:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing")
        return default
    v = d[key]
    if not (isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v)):
        raise ValidationError(f"{path}.{key}", f"expected [x, y], got {v!r}")
    return v


def _num_list(d: dict, key: str, path: str, *, nonneg=False, positive=False) -> list:
    if key not in d:
        raise ValidationError(f"{path}.{key}", "missing")
    v = d[key]
    if not isinstance(v, list) or not v or not all(_is_num(x) for x in v):
        raise ValidationError(f"{path}.{key}", f"expected a nonempty list of numbers, got {v!r}")
    if nonneg and any(x < 0 for x in v):
        raise ValidationError(f"{path}.{key}", "entries must be >= 0")
    if positive and any(x <= 0 for x in v):
        raise ValidationError(f"{path}.{key}", "entries must be positive")
    return v


def _section(doc: dict, key: str) -> dict:
    v = doc[key]
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ValidationError(key, f"expected a mapping, got {type(v).__name__}")
    return v


def _no_unknown(d: dict, allowed: set, path: str) -> None:
    for k in d:
        if k not in allowed:
            raise ValidationError(f"{path}.{k}" if path else str(k), "unknown key")


def _check_domain(d: dict) -> None:
    kind = d.get("kind")
    if kind not in DOMAIN_KEYS:
        raise ValidationError("domain.kind", f"expected one of {sorted(DOMAIN_KEYS)}, got {kind!r}")
    _no_unknown(d, DOMAIN_KEYS[kind] | {"kind"}, "domain")
    if kind == "rectangle":
        for k in ("x0", "x1", "y0", "y1"):
            _num(d, k, "domain")
    elif kind == "disc":
        _pair(d, "center", "domain", [0, 0])
        _num(d, "radius", "domain", positive=True)
    else:
        _pair(d, "center", "domain", [0, 0])
        _num(d, "r_inner", "domain", positive=True)
        _num(d, "r_outer", "domain", positive=True)
    try:
        domain_from_dict(d)
    except InvalidSpec as exc:
        raise ValidationError("domain", str(exc)) from exc


def _check_weight(d: dict) -> None:
    tag = d.get("tag")
    if tag not in WEIGHT_KEYS:
        raise ValidationError("weight.tag", f"expected one of {sorted(WEIGHT_KEYS)}, got {tag!r}")
    _no_unknown(d, WEIGHT_KEYS[tag] | {"tag"}, "weight")
    for k in ("beta", "scale", "r0"):
        if k in d:
            _num(d, k, "weight", positive=(k == "r0"))
    if "center" in d:
        _pair(d, "center", "weight")
    if tag == "flat_disc":
        _num(d, "r0", "weight", positive=True)
    if tag == "hol_squares":
        coeffs = d.get("coeffs", [])
        if not isinstance(coeffs, list):
            raise ValidationError("weight.coeffs", "expected a list of coefficient lists")
        for c in coeffs:
            if not isinstance(c, list) or not c:
                raise ValidationError("weight.coeffs", f"bad coefficient list {c!r}")
            for a in c:
                ok = _is_num(a) or (isinstance(a, list) and len(a) == 2 and all(_is_num(x) for x in a))
                if not ok:
                    raise ValidationError("weight.coeffs", f"coefficient must be a number or [re, im], got {a!r}")
    try:
        weight_from_dict(d)
    except InvalidParams as exc:
        raise ValidationError("weight", str(exc)) from exc


def _check_set(d, path: str) -> None:
    if not isinstance(d, dict):
        raise ValidationError(path, "expected a mapping")
    kind = d.get("kind")
    if kind not in SET_KEYS:
        raise ValidationError(f"{path}.kind", f"expected one of {sorted(SET_KEYS)}, got {kind!r}")
    _no_unknown(d, SET_KEYS[kind] | {"kind"}, path)
    if kind == "point":
        _pair(d, "p", path)
    elif kind == "segment":
        _pair(d, "p", path)
        _pair(d, "q", path)
    elif kind == "closed_disc":
        _pair(d, "center", path)
        _num(d, "radius", path, positive=True)
    else:
        parts = d.get("parts")
        if not isinstance(parts, list) or not parts:
            raise ValidationError(f"{path}.parts", "expected a nonempty list")
        for k, part in enumerate(parts):
            _check_set(part, f"{path}.parts[{k}]")


def _check_command(cmd: str, p: dict) -> None:
    _no_unknown(p, COMMAND_KEYS[cmd], cmd)
    for k in ("thresh_ratio", "tail_ratio"):
        if k in p:
            _num(p, k, cmd, positive=True)
    if cmd == "eig":
        _num(p, "n", cmd, nonneg=True, required=False)
        op = p.get("operator", "magnetic")
        if op not in OPERATORS:
            raise ValidationError("eig.operator", f"expected one of {OPERATORS}, got {op!r}")
    elif cmd == "kato":
        _num(p, "n", cmd, nonneg=True)
    elif cmd == "sweep":
        ns = _num_list(p, "n_list", cmd, nonneg=True)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValidationError("sweep.n_list", "must be strictly increasing")
    elif cmd == "flux":
        beta = _num(p, "beta", cmd)
        if beta == 0:
            raise ValidationError("flux.beta", "must be nonzero")
        ts = _num_list(p, "t_list", cmd, nonneg=True)
        if max(ts) - min(ts) < 1 / abs(beta) - 1e-12:
            raise ValidationError("flux.t_list", "must cover at least one period 1/|beta|")
    elif cmd == "pcheck":
        if "set" not in p:
            raise ValidationError("pcheck.set", "missing")
        _check_set(p["set"], "pcheck.set")
        rs = _num_list(p, "radii", cmd, positive=True)
        if any(b >= a for a, b in zip(rs, rs[1:])):
            raise ValidationError("pcheck.radii", "must be strictly decreasing")
        f = _num(p, "h_factor", cmd, positive=True, required=False)
        if f is not None and f > 0.25:
            raise ValidationError("pcheck.h_factor", "must be <= 1/4")


def _check_output(d: dict) -> None:
    _no_unknown(d, OUTPUT_KEYS, "output")
    for k, v in d.items():
        if not isinstance(v, str) or not v:
            raise ValidationError(f"output.{k}", f"expected a path, got {v!r}")
        parent = os.path.dirname(os.path.abspath(v))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise ValidationError(f"output.{k}", f"directory {parent!r} is not writable")


def validate(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "config must be a mapping")
    _no_unknown(doc, TOP_KEYS, "")
    present = [c for c in COMMANDS if c in doc]
    if len(present) != 1:
        raise ValidationError("<command>", f"exactly one of {COMMANDS} required, found {present or 'none'}")
    cmd = present[0]
    params = _section(doc, cmd)
    for need in NEEDS[cmd]:
        if need not in doc:
            raise ValidationError(need, f"section required by {cmd!r}")
    for extra in ("domain", "weight", "grid"):
        if extra in doc and extra not in NEEDS[cmd]:
            raise ValidationError(extra, f"section not used by {cmd!r}")

    domain = weight = grid = None
    if "domain" in doc:
        domain = _section(doc, "domain")
        _check_domain(domain)
    if "weight" in doc:
        weight = _section(doc, "weight")
        _check_weight(weight)
    if "grid" in doc:
        grid = _section(doc, "grid")
        _no_unknown(grid, {"h"}, "grid")
        _num(grid, "h", "grid", positive=True)
    solver = _section(doc, "solver") if "solver" in doc else {}
    _no_unknown(solver, SOLVER_KEYS, "solver")
    _num(solver, "tol", "solver", positive=True, required=False)
    _num(solver, "max_iter", "solver", positive=True, required=False, integer=True)
    _num(solver, "block_size", "solver", positive=True, required=False, integer=True)
    _num(solver, "seed", "solver", nonneg=True, required=False, integer=True)
    if solver.get("preconditioner", "auto") not in ("auto", "jacobi", "amg", "none"):
        raise ValidationError("solver.preconditioner", f"unknown preconditioner {solver['preconditioner']!r}")
    _check_command(cmd, params)
    output = _section(doc, "output") if "output" in doc else {}
    _check_output(output)
    if "matrix" in output and cmd != "eig":
        raise ValidationError("output.matrix", "matrix dumps are only available for eig")
    return RunConfig(cmd, params, domain, weight, grid, solver, output)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ParseError(str(exc.problem or exc), line) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from exc
    return validate(doc)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def domain_from_dict(d: dict) -> DomainSpec:
    kind = d["kind"]
    if kind == "rectangle":
        return DomainSpec.rectangle(d["x0"], d["x1"], d["y0"], d["y1"])
    if kind == "disc":
        return DomainSpec.disc(d.get("center", (0, 0)), d["radius"])
    if kind == "annulus":
        return DomainSpec.annulus(d.get("center", (0, 0)), d["r_inner"], d["r_outer"])
    raise InvalidSpec(f"unknown domain kind {kind!r}")


def _coef(a) -> complex:
    return complex(a[0], a[1]) if isinstance(a, list) else complex(a)


def weight_from_dict(d: dict) -> Weight:
    params = {k: v for k, v in d.items() if k != "tag"}
    if "coeffs" in params:
        params["coeffs"] = [[_coef(a) for a in c] for c in params["coeffs"]]
    if "center" in params:
        params["center"] = tuple(params["center"])
    return make_weight(d["tag"], **params)


def set_from_dict(d: dict) -> CompactSetSpec:
    kind = d["kind"]
    if kind == "point":
        return CompactSetSpec.point(d["p"])
    if kind == "segment":
        return CompactSetSpec.segment(d["p"], d["q"])
    if kind == "closed_disc":
        return CompactSetSpec.closed_disc(d["center"], d["radius"])
    return CompactSetSpec.finite_union([set_from_dict(p) for p in d["parts"]])
