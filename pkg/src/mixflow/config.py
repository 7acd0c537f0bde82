"""Scenario configuration: JSON schema, loading and conversion to model objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema
import numpy as np

from .analysis import CoeffGrowthSpec, as_fraction
from .errors import ValidationError
from .species import ReferenceState, SpeciesParams, Variant
from .transport import OnsagerInputs, PowerLaw

SCHEMA_ID = "mixflow/1"

_exponent = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}]}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}


def _obj(props: Dict[str, Any], required=()) -> Dict[str, Any]:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_power = _obj({"coef": {"type": "number"}, "exponent": _exponent}, ["coef"])

SCHEMA: Dict[str, Any] = _obj({
    "schema": {"const": SCHEMA_ID},
    "seed": {"type": "integer", "minimum": 0},
    "reference": _obj({"p0": _pos, "T0": _pos}),
    "species": {"type": "array", "minItems": 1, "items": _obj({
        "name": {"type": "string"},
        "variant": {"enum": [v.value for v in Variant]},
        "c0": _pos,
        "rhoR": _pos,
        "g1": {"type": "number"},
        "g0": {"type": "number"},
        "molar_mass": _pos,
        "alpha": {"type": "number"},
        "beta": {"type": "number"},
        "gamma": {"type": "number"},
    }, ["variant", "c0"])},
    "transport": _obj({
        "mobility": _power,
        "kappatilde": _power,
        "ltilde": _obj({"coef": _vec, "exponent": _exponent}, ["coef"]),
        "eta": _power,
        "lam": _power,
    }),
    "solver": _obj({
        "L": _pos,
        "J": {"type": "integer", "minimum": 8},
        "dt": _pos,
        "t_end": _pos,
        "fp_tol": _pos,
        "fp_maxiter": {"type": "integer", "minimum": 1},
        "cfl_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "k_levels": {"type": "array", "items": {"type": "number"}},
        "snapshot_every": {"type": "integer", "minimum": 0},
    }, ["J", "dt", "t_end"]),
    "boundary": {"oneOf": [
        _obj({"type": {"const": "insulated"}}, ["type"]),
        _obj({"type": {"const": "robin"}, "alpha": {"type": "number"}, "T_ext": _pos}, ["type", "alpha", "T_ext"]),
    ]},
    "initial": {"oneOf": [
        _obj({"type": {"const": "uniform"}, "T": _pos, "rho": _vec, "v": {"type": "number"}}, ["type", "T", "rho"]),
        _obj({"type": {"const": "sinusoidal"}, "T": _pos, "rho": _vec, "T_amp": {"type": "number"},
              "rho_amp": _vec, "v_amp": {"type": "number"}, "modes": {"type": "integer", "minimum": 1}},
             ["type", "T", "rho"]),
    ]},
    "forces": {"oneOf": [
        _obj({"type": {"const": "zero"}}, ["type"]),
        _obj({"type": {"const": "constant"}, "b": _vec}, ["type", "b"]),
    ]},
    "growth": _obj({
        "p": {"oneOf": [{"type": "number", "exclusiveMinimum": 5}, {"type": "string"}]},
        "kappa_lower": _exponent, "kappa_upper": _exponent,
        "l": _exponent, "M": _exponent, "eta": _exponent, "lam": _exponent,
    }),
    "asymptotics": _obj({
        "varrho": _pos,
        "qbar": {"type": "array", "items": {"type": "number"}},
        "T_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
        "n": {"type": "integer", "minimum": 8},
        "quantities": {"type": "array", "items": {"type": "string"}},
    }),
    "tabulate": _obj({
        "T": {"type": "array", "items": _pos, "minItems": 1},
        "rho": {"type": "array", "items": {"type": "array", "items": _pos, "minItems": 1}, "minItems": 1},
    }, ["T", "rho"]),
}, ["schema", "species"])


class ConfigError(ValidationError):
    pass


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return f"{where}: unknown key(s) {', '.join(map(repr, extra))} (additionalProperties is false)"
    if err.validator == "required":
        return f"{where}: {err.message} (required)"
    if err.validator == "oneOf" and isinstance(err.instance, dict) and "type" in err.instance:
        return f"{where}: block of type {err.instance['type']!r} has missing, unknown or invalid keys"
    return f"{where}: {err.message} (constraint {err.validator})"


def validate_config(cfg: Dict[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))
    N = len(cfg["species"])
    for path, vec in _vector_fields(cfg, N):
        if len(vec) != N:
            raise ConfigError(f"{path}: expected {N} entries (one per species), got {len(vec)}")


def _vector_fields(cfg, N):
    init = cfg.get("initial", {})
    for key in ("rho", "rho_amp"):
        if key in init:
            yield f"initial/{key}", init[key]
    if "b" in cfg.get("forces", {}):
        yield "forces/b", cfg["forces"]["b"]
    if "ltilde" in cfg.get("transport", {}):
        yield "transport/ltilde/coef", cfg["transport"]["ltilde"]["coef"]
    for i, r in enumerate(cfg.get("tabulate", {}).get("rho", [])):
        yield f"tabulate/rho/{i}", r
    asy = cfg.get("asymptotics", {})
    if "qbar" in asy and len(asy["qbar"]) != N - 1:
        raise ConfigError(f"asymptotics/qbar: expected {N - 1} entries, got {len(asy['qbar'])}")


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    validate_config(cfg)
    return cfg


def reference(cfg) -> ReferenceState:
    return ReferenceState(**cfg.get("reference", {}))


def species_list(cfg) -> List[SpeciesParams]:
    out = []
    for k, raw in enumerate(cfg["species"]):
        d = dict(raw)
        d["variant"] = Variant(d["variant"])
        d.setdefault("name", f"species{k + 1}")
        if d["variant"] is Variant.IDEAL_GAS:
            d["gamma"] = 0.0
        out.append(SpeciesParams(**d))
    return out


def _fexp(x) -> Fraction:
    return as_fraction(x.replace(" ", "") if isinstance(x, str) else x)


def _power_law(block: Optional[dict], default: PowerLaw) -> PowerLaw:
    if block is None:
        return default
    return PowerLaw(float(block["coef"]), float(_fexp(block.get("exponent", 0))))


@dataclass(frozen=True)
class LtildePower:
    """``coef * T**exponent`` with a vector coefficient."""

    coef: tuple
    exponent: float = 0.0

    def __call__(self, T, rho=None):
        T = np.asarray(T, dtype=float)
        return np.asarray(self.coef) * (T**self.exponent)[..., None]


def onsager_inputs(cfg) -> OnsagerInputs:
    tr = cfg.get("transport", {})
    mob = _power_law(tr.get("mobility"), PowerLaw(1.0))
    lt = tr.get("ltilde")
    ltilde = None if lt is None else LtildePower(tuple(lt["coef"]), float(_fexp(lt.get("exponent", 0))))
    return OnsagerInputs(mobility=mob, kappatilde=_power_law(tr.get("kappatilde"), PowerLaw(1.0)), ltilde=ltilde)


def viscosities(cfg):
    tr = cfg.get("transport", {})
    return _power_law(tr.get("eta"), PowerLaw(0.0)), _power_law(tr.get("lam"), PowerLaw(0.0))


def growth_spec(cfg) -> CoeffGrowthSpec:
    """Exponents from an explicit ``growth`` block, else derived from the transport power laws.

    Coefficients that vanish identically impose no restriction and map to ``None``.
    """
    g = cfg.get("growth", {})
    tr = cfg.get("transport", {})

    def exp_of(key, default=Fraction(0)):
        blk = tr.get(key)
        if blk is None:
            return default
        return None if float(blk["coef"]) == 0 else _fexp(blk.get("exponent", 0))

    m = exp_of("mobility")
    k = exp_of("kappatilde")
    lt = tr.get("ltilde")
    if lt is None or not any(lt["coef"]) or m is None:
        l_exp = None
    else:
        # l = -M ltilde, kappa = kappatilde + M ltilde.ltilde
        lte = _fexp(lt.get("exponent", 0))
        l_exp = m + lte
    k_hi = k if l_exp is None else max(k, m + 2 * lte)
    derived = {"kappa_lower": k, "kappa_upper": k_hi, "l": l_exp, "M": m,
               "eta": exp_of("eta", None), "lam": exp_of("lam", None)}
    for key in derived:
        if key in g:
            derived[key] = _fexp(g[key])
    return CoeffGrowthSpec(**derived)


def growth_p(cfg, override=None):
    if override is not None:
        return _fexp(override)
    return _fexp(cfg.get("growth", {}).get("p", 6))
