"""JSON problem files: schema, loading into a SystemSpec, and serialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema

from . import expr as ex
from .errors import ConecertError, SchemaError, ValidationError
from .fixedpoint import ComponentSpec, SystemSpec
from .functionals import DEFAULT_SAMPLES, FunctionalSpec, Integral, PointEval
from .geometry import build_grid, domain_from_dict
from .greens import SolverConfig
from .operator import BoundarySpec, EllipticSpec, reaction_vanishes, validate_boundary, validate_elliptic

_NUM = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_NUMLIST = {"type": "array", "items": {"oneOf": [{"type": "number"}, {"type": "string"}, {"type": "null"}]}}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["domain", "n", "components"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "domain": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "radius"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "disk"}, "center": _POINT, "radius": {"type": "number", "exclusiveMinimum": 0}},
                },
                {
                    "type": "object",
                    "required": ["type", "lo", "hi"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "rectangle"}, "lo": _POINT, "hi": _POINT},
                },
            ]
        },
        "n": {"type": "integer", "minimum": 1},
        "components": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["f", "rho"],
                "additionalProperties": False,
                "properties": {
                    "L": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "diffusion": {
                                "type": "array",
                                "minItems": 2,
                                "maxItems": 2,
                                "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "string"}},
                            },
                            "advection": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "string"}},
                            "reaction": {"type": "string"},
                        },
                    },
                    "B": {
                        "type": "object",
                        "required": ["kind"],
                        "additionalProperties": False,
                        "properties": {"kind": {"enum": ["dirichlet", "neumann", "robin"]}, "b": {"type": "string"}},
                    },
                    "f": {"type": "string"},
                    "h": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "primitives": {
                                "type": "object",
                                "additionalProperties": {
                                    "oneOf": [
                                        {
                                            "type": "object",
                                            "required": ["point", "component"],
                                            "additionalProperties": False,
                                            "properties": {"point": _POINT, "component": {"type": "integer", "minimum": 1}},
                                        },
                                        {
                                            "type": "object",
                                            "required": ["integral"],
                                            "additionalProperties": False,
                                            "properties": {
                                                "integral": {
                                                    "type": "object",
                                                    "required": ["component"],
                                                    "additionalProperties": False,
                                                    "properties": {
                                                        "component": {"type": "integer", "minimum": 1},
                                                        "weight": {"type": "string"},
                                                    },
                                                }
                                            },
                                        },
                                    ]
                                },
                            },
                            "combiner": {"type": "string"},
                        },
                    },
                    "rho": _NUM,
                    "lambda": _NUM,
                    "eta": _NUM,
                },
            },
        },
        "constants": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": _NUMLIST,
                "H": _NUMLIST,
                "tau": _NUMLIST,
                "xi": _NUMLIST,
                "K1_norm": _NUMLIST,
                "gamma_norm": _NUMLIST,
                "mu": _NUMLIST,
                "delta": _NUM,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "samples_per_axis": {"type": "integer", "minimum": 2},
                "x_samples": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["auto", "direct", "cg", "bicgstab"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "existence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"i0": {"type": "integer", "minimum": 1}, "rho0": _NUM},
        },
    },
}


@dataclass
class ProblemConfig:
    name: str = ""
    h: float = 1.0 / 64
    samples: int = DEFAULT_SAMPLES
    x_samples: Optional[int] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    constants: dict = field(default_factory=dict)
    i0: int = 0  # 0-based
    rho0: Union[float, str] = "auto"


def _constant(value, pointer):
    try:
        return ex.parse_constant(value)
    except ConecertError as exc:
        raise ValidationError(str(exc), pointer) from None


def _expr(text, names, pointer):
    try:
        return ex.parse(text, names)
    except ConecertError as exc:
        raise ValidationError(str(exc), pointer) from None


def _schema_check(doc):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise SchemaError(err.message, pointer)


def load_problem_dict(doc: dict):
    """Validate a problem document and build (SystemSpec, ProblemConfig)."""
    _schema_check(doc)
    n = doc["n"]
    if len(doc["components"]) != n:
        raise ValidationError(f"n = {n} but {len(doc['components'])} components given", "/components")
    try:
        domain = domain_from_dict(doc["domain"])
    except ValueError as exc:
        raise ValidationError(str(exc), "/domain") from None
    comps = []
    coeff_names = ex.signature(0)
    for i, c in enumerate(doc["components"]):
        where = f"/components/{i}"
        Ld = c.get("L", {})
        L = EllipticSpec(
            tuple(
                tuple(_expr(t, coeff_names, f"{where}/L/diffusion/{a}/{b}") for b, t in enumerate(row))
                for a, row in enumerate(Ld.get("diffusion", [["1", "0"], ["0", "1"]]))
            ),
            tuple(_expr(t, coeff_names, f"{where}/L/advection/{a}") for a, t in enumerate(Ld.get("advection", ["0", "0"]))),
            _expr(Ld.get("reaction", "0"), coeff_names, f"{where}/L/reaction"),
        )
        Bd = c.get("B", {"kind": "dirichlet"})
        if Bd["kind"] == "robin":
            B = BoundarySpec("robin", _expr(Bd.get("b", "1"), coeff_names, f"{where}/B/b"))
        else:
            B = BoundarySpec(Bd["kind"])
        f = _expr(c["f"], ex.signature(n), f"{where}/f")
        hd = c.get("h", {})
        prims = []
        for name, p in hd.get("primitives", {}).items():
            if name in ex.RESERVED:
                raise ValidationError(f"primitive name {name!r} is reserved", f"{where}/h/primitives/{name}")
            if "point" in p:
                comp = p["component"]
                prim = PointEval(comp - 1, tuple(float(v) for v in p["point"]))
                if not domain.contains(prim.point):
                    raise ValidationError("functional point must lie inside the domain", f"{where}/h/primitives/{name}/point")
            else:
                comp = p["integral"]["component"]
                w = _expr(p["integral"].get("weight", "1"), coeff_names, f"{where}/h/primitives/{name}/integral/weight")
                prim = Integral(comp - 1, w)
            if comp > n:
                raise ValidationError(f"component {comp} exceeds n = {n}", f"{where}/h/primitives/{name}")
            prims.append((name, prim))
        combiner = _expr(hd.get("combiner", "0"), [p[0] for p in prims], f"{where}/h/combiner")
        comps.append(
            ComponentSpec(
                L,
                B,
                f,
                FunctionalSpec(tuple(prims), combiner),
                _constant(c.get("lambda", 0), f"{where}/lambda"),
                _constant(c.get("eta", 0), f"{where}/eta"),
                _constant(c["rho"], f"{where}/rho"),
            )
        )
    spec = SystemSpec(domain, tuple(comps))
    spec.validate()
    h = float(doc.get("grid", {}).get("h", 1.0 / 64))
    _check_operators(spec, h)

    consts = {}
    for key, vals in doc.get("constants", {}).items():
        if isinstance(vals, list):
            consts[key] = [None if v is None else _constant(v, f"/constants/{key}/{j}") for j, v in enumerate(vals)]
        else:
            consts[key] = _constant(vals, f"/constants/{key}")
    g = doc.get("grid", {})
    s = doc.get("solver", {})
    e = doc.get("existence", {})
    rho0 = e.get("rho0", "auto")
    if rho0 != "auto":
        rho0 = _constant(rho0, "/existence/rho0")
    i0 = e.get("i0", 1)
    if i0 > n:
        raise ValidationError(f"i0 = {i0} exceeds n = {n}", "/existence/i0")
    cfg = ProblemConfig(
        name=doc.get("name", ""),
        h=float(g.get("h", 1.0 / 64)),
        samples=int(g.get("samples_per_axis", DEFAULT_SAMPLES)),
        x_samples=g.get("x_samples"),
        solver=SolverConfig(
            method=s.get("method", "auto"), tol=float(s.get("tol", 1e-10)), max_iter=int(s.get("max_iter", 20000))
        ),
        constants=consts,
        i0=i0 - 1,
        rho0=rho0,
    )
    return spec, cfg


def _check_operators(spec, h):
    """Ellipticity, reaction sign and boundary coefficients at the nodes of the working grid."""
    try:
        grid = build_grid(spec.domain, h)
    except ConecertError as exc:
        raise ValidationError(str(exc), "/grid/h") from None
    for i, c in enumerate(spec.components):
        where = f"/components/{i}"
        try:
            validate_elliptic(c.L, grid)
        except ConecertError as exc:
            raise ValidationError(str(exc), where + "/L") from None
        try:
            validate_boundary(c.B, grid)
        except ConecertError as exc:
            raise ValidationError(str(exc), where + "/B/b") from None
        if c.B.kind == "neumann" and reaction_vanishes(c.L, grid):
            raise ValidationError("neumann boundary needs a reaction term a != 0", where + "/B")


def load_problem(path):
    """Read and validate a problem file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return load_problem_dict(doc)


def bundled_problem_path(name: str) -> Path:
    return Path(str(resources.files("conecert") / "problems" / f"{name}.json"))


def load_bundled(name: str):
    return load_problem(bundled_problem_path(name))


def problem_to_dict(spec: SystemSpec, cfg: Optional[ProblemConfig] = None) -> dict:
    """Inverse of :func:`load_problem_dict` (floats written exactly)."""
    comps = []
    for c in spec.components:
        prims = {}
        for name, p in c.h.primitives:
            if isinstance(p, PointEval):
                prims[name] = {"point": list(p.point), "component": p.component + 1}
            else:
                prims[name] = {"integral": {"component": p.component + 1, "weight": ex.to_text(p.weight)}}
        comps.append(
            {
                "L": c.L.to_dict(),
                "B": c.B.to_dict(),
                "f": ex.to_text(c.f),
                "h": {"primitives": prims, "combiner": ex.to_text(c.h.combiner)},
                "rho": c.rho,
                "lambda": c.lam,
                "eta": c.eta,
            }
        )
    doc = {"domain": spec.domain.to_dict(), "n": spec.n, "components": comps}
    if cfg is not None:
        if cfg.name:
            doc["name"] = cfg.name
        if cfg.constants:
            doc["constants"] = cfg.constants
        doc["grid"] = {"h": cfg.h, "samples_per_axis": cfg.samples, "x_samples": cfg.x_samples}
        doc["solver"] = {"method": cfg.solver.method, "tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter}
        doc["existence"] = {"i0": cfg.i0 + 1, "rho0": cfg.rho0}
    return doc
