"""Gibbs free-energy models of the individual constituents.

Two families are supported, both written in nondimensional units with the
gas constant normalized to one:

* Tait-type liquids,
  ``g = p0/(beta rhoR) tau^alpha pi^beta - c0 T0/(gamma(gamma+1)) tau^(gamma+1) + g1 T + g0``
* ideal gases,
  ``g = p0/(rhoR T0) T ln(pi) - c0 T (ln tau - 1) + g1 T + g0``

with ``tau = T/T0`` and ``pi = p/p0``.  For a Tait species with
``gamma = 0`` the heat-capacity term is replaced by its limit
``-c0 T (ln tau - 1)``, which keeps ``c0 tau^gamma`` as the thermal part of
the heat capacity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List

import numpy as np

from .errors import ConsistencyError, DomainError, ValidationError


class Variant(str, Enum):
    TAIT = "tait"
    IDEAL_GAS = "ideal_gas"


@dataclass(frozen=True)
class ReferenceState:
    """Reference pressure and temperature (``p0``, ``T0``)."""

    p0: float = 1.0
    T0: float = 1.0

    def __post_init__(self):
        if not (self.p0 > 0 and self.T0 > 0):
            raise ValidationError(f"reference state needs p0 > 0 and T0 > 0, got p0={self.p0}, T0={self.T0}")


@dataclass(frozen=True)
class SpeciesParams:
    """Parameters of one constituent.

    ``alpha`` and ``beta`` are only used by the Tait variant; ideal gases
    always carry ``gamma = 0``.
    """

    variant: Variant
    c0: float
    rhoR: float = 1.0
    g1: float = 0.0
    g0: float = 0.0
    molar_mass: float = 1.0
    alpha: float = 0.0
    beta: float = 0.5
    gamma: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.IDEAL_GAS:
            object.__setattr__(self, "gamma", 0.0)

    @classmethod
    def tait(cls, alpha, beta, gamma, c0, rhoR=1.0, g1=0.0, g0=0.0, molar_mass=1.0, name=""):
        return cls(Variant.TAIT, c0=c0, rhoR=rhoR, g1=g1, g0=g0, molar_mass=molar_mass,
                   alpha=alpha, beta=beta, gamma=gamma, name=name)

    @classmethod
    def ideal_gas(cls, c0, rhoR=1.0, g1=0.0, g0=0.0, molar_mass=1.0, name=""):
        return cls(Variant.IDEAL_GAS, c0=c0, rhoR=rhoR, g1=g1, g0=g0, molar_mass=molar_mass, name=name)

    @property
    def is_ideal(self) -> bool:
        return self.variant is Variant.IDEAL_GAS


@dataclass(frozen=True, eq=False)
class GibbsDerivs:
    """Value and first/second derivatives of ``g(T, p)``."""

    g: np.ndarray
    gT: np.ndarray
    gp: np.ndarray
    gTT: np.ndarray
    gTp: np.ndarray
    gpp: np.ndarray


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_positive(T, p):
    T = np.asarray(T, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (np.all(T > 0) and np.all(np.isfinite(T))):
        raise DomainError("temperature must be positive and finite")
    if not (np.all(p > 0) and np.all(np.isfinite(p))):
        raise DomainError("pressure must be positive and finite")
    return T, p


def _derivs(sp: SpeciesParams, ref: ReferenceState, T, p) -> GibbsDerivs:
    """Unchecked evaluation of :func:`gibbs_derivs` (inputs assumed valid)."""
    tau = T / ref.T0
    lnpi = np.log(p / ref.p0)
    if sp.variant is Variant.TAIT:
        al, be, ga, c0 = sp.alpha, sp.beta, sp.gamma, sp.c0
        A = ref.p0 / (be * sp.rhoR) * tau**al * np.exp(be * lnpi)
        taug = tau**ga
        if ga > 0:
            heat = -c0 * ref.T0 / (ga * (ga + 1.0)) * taug * tau
            heatT = -(c0 / ga) * taug
        else:
            heat = -c0 * T * (np.log(tau) - 1.0)
            heatT = -c0 * np.log(tau)
        g = A + heat + sp.g1 * T + sp.g0
        gT = al * A / T + heatT + sp.g1
        gp = be * A / p
        gTT = al * (al - 1.0) * A / T**2 - (c0 / T) * taug
        gTp = al * be * A / (T * p)
        gpp = be * (be - 1.0) * A / p**2
    else:
        a = ref.p0 / (sp.rhoR * ref.T0)
        lntau = np.log(tau)
        g = a * T * lnpi - sp.c0 * T * (lntau - 1.0) + sp.g1 * T + sp.g0
        gT = a * lnpi - sp.c0 * lntau + sp.g1
        gp = a * T / p
        gTT = -sp.c0 / T
        gTp = a / p
        gpp = -a * T / p**2
    return GibbsDerivs(g, gT, gp, gTT * np.ones_like(gp), gTp, gpp)


def _enthalpy0(sp: SpeciesParams, ref: ReferenceState, T, p):
    """Enthalpy without the constant ``g0``."""
    tau = T / ref.T0
    if sp.variant is Variant.TAIT:
        A = ref.p0 / (sp.beta * sp.rhoR) * tau**sp.alpha * (p / ref.p0) ** sp.beta
        return (1.0 - sp.alpha) * A + sp.c0 * ref.T0 / (sp.gamma + 1.0) * tau ** (sp.gamma + 1.0)
    return sp.c0 * T * np.ones_like(np.asarray(p, dtype=float))


def gibbs(species: SpeciesParams, ref: ReferenceState, T, p):
    """Gibbs free energy ``g_i(T, p)``."""
    T, p = _check_positive(T, p)
    return _derivs(species, ref, T, p).g


def gibbs_derivs(species: SpeciesParams, ref: ReferenceState, T, p) -> GibbsDerivs:
    T, p = _check_positive(T, p)
    return _derivs(species, ref, T, p)


def enthalpy(species: SpeciesParams, ref: ReferenceState, T, p):
    """``H = g - T dg/dT``, evaluated in closed form."""
    T, p = _check_positive(T, p)
    return _enthalpy0(species, ref, T, p) + species.g0


def _cv_from_derivs(d: GibbsDerivs, T):
    return -T * (d.gTT - d.gTp**2 / d.gpp)


def cv_species(species: SpeciesParams, ref: ReferenceState, T, p):
    """Isochoric heat capacity ``-T (gTT - gTp^2/gpp)``."""
    T, p = _check_positive(T, p)
    cv = _cv_from_derivs(_derivs(species, ref, T, p), T)
    if np.any(cv <= 0):
        raise ConsistencyError("non-positive species heat capacity; parameters are inconsistent")
    return cv


def parameter_violations(species: SpeciesParams, ref: ReferenceState) -> List[str]:
    out = []
    if not species.molar_mass > 0:
        out.append("molar mass M > 0")
    if not species.rhoR > 0:
        out.append("reference density rhoR > 0")
    if species.variant is Variant.TAIT:
        al, be, ga = species.alpha, species.beta, species.gamma
        if not 0 <= al < 1:
            out.append("0 <= alpha < 1")
        if not 0 < be < 1:
            out.append("0 < beta < 1")
        if not al + be <= 1:
            out.append("alpha+beta <= 1")
        if not ga >= 0:
            out.append("gamma >= 0")
        if not species.c0 > 0:
            out.append("c0 > 0")
    else:
        bound = ref.p0 / (ref.T0 * species.rhoR) if species.rhoR > 0 else np.inf
        if not species.c0 > bound:
            out.append(f"ideal gas c0 > p0/(T0 rhoR) = {bound:g}")
    return out


def validate_species(species: SpeciesParams, ref: ReferenceState, n_grid: int = 7) -> ValidationReport:
    """List violated parameter constraints and probe the sign conditions.

    The derivative signs are sampled on an ``n_grid`` x ``n_grid``
    log-spaced grid over ``[1e-3, 1e6]^2`` in ``(T, p)``.
    """
    report = ValidationReport(parameter_violations(species, ref))
    if report.violations:
        return report
    grid = np.logspace(-3, 6, n_grid)
    T, p = np.meshgrid(grid, grid, indexing="ij")
    with np.errstate(all="ignore"):
        d = _derivs(species, ref, T, p)
        schur = d.gTT - d.gTp**2 / d.gpp
    for label, ok in (("gp > 0", d.gp > 0), ("gpp < 0", d.gpp < 0), ("gTT < 0", d.gTT < 0),
                      ("gTT - gTp^2/gpp < 0", schur < 0)):
        # Values that under/overflow at the grid corners are not sign failures.
        ok = ok | ~np.isfinite(schur)
        if not np.all(ok):
            report.violations.append(f"sign condition {label} fails on the sampling grid")
    return report
