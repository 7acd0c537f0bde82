"""Ideal-mixture constitutive model in the primal variables ``(T, rho)``.

The pressure of the mixture is the root of ``sum_i rho_i dg_i/dp = 1``;
all other potentials follow from it.  Every function broadcasts over
leading axes: ``T`` has shape ``S`` and ``rho`` has shape ``S + (N,)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConsistencyError, DomainError, ValidationError
from .roots import solve_monotone
from .species import (GibbsDerivs, ReferenceState, SpeciesParams, Variant, _derivs, _enthalpy0,
                      parameter_violations)

PRESSURE_TOL = 1e-13
TEMPERATURE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class MixtureModel:
    species: Tuple[SpeciesParams, ...]
    ref: ReferenceState = ReferenceState()

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        if len(self.species) < 1:
            raise ValidationError("a mixture needs at least one species")
        problems = [f"species {i + 1}: {v}" for i, sp in enumerate(self.species)
                    for v in parameter_violations(sp, self.ref)]
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "M", np.array([sp.molar_mass for sp in self.species], dtype=float))
        object.__setattr__(self, "g0", np.array([sp.g0 for sp in self.species], dtype=float))

    @property
    def N(self) -> int:
        return len(self.species)

    def derivs(self, T, p) -> GibbsDerivs:
        """Species derivatives stacked along a trailing axis of length N."""
        parts = [_derivs(sp, self.ref, T, p) for sp in self.species]
        return GibbsDerivs(*(np.stack([getattr(d, k) for d in parts], axis=-1)
                             for k in ("g", "gT", "gp", "gTT", "gTp", "gpp")))

    def enthalpy0(self, T, p):
        """Species enthalpies without the ``g0`` offsets."""
        return np.stack([_enthalpy0(sp, self.ref, T, p) for sp in self.species], axis=-1)

    def gp(self, T, p):
        return np.stack([_gp(sp, self.ref, T, p) for sp in self.species], axis=-1)


def _gp(sp: SpeciesParams, ref: ReferenceState, T, p):
    if sp.variant is Variant.TAIT:
        return (ref.p0 / (sp.rhoR * p)) * (T / ref.T0) ** sp.alpha * (p / ref.p0) ** sp.beta
    return ref.p0 * T / (sp.rhoR * ref.T0 * p)


@dataclass(frozen=True, eq=False)
class MixtureState:
    T: np.ndarray
    rho: np.ndarray


@dataclass(frozen=True, eq=False)
class ConservedState:
    """Conserved variables ``w = (rho_1, ..., rho_N, rho u)``."""

    rho: np.ndarray
    rhou: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.rho, float), np.asarray(self.rhou, float)[..., None]], axis=-1)

    @classmethod
    def from_vector(cls, w) -> "ConservedState":
        w = np.asarray(w, dtype=float)
        return cls(w[..., :-1], w[..., -1])


def _check_state(model: MixtureModel, T, rho):
    T = np.asarray(T, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1:] != (model.N,):
        raise DomainError(f"rho must have trailing length {model.N}, got shape {rho.shape}")
    if not (np.all(T > 0) and np.all(np.isfinite(T))):
        raise DomainError("temperature must be positive and finite")
    if not (np.all(rho > 0) and np.all(np.isfinite(rho))):
        raise DomainError("partial densities must be positive and finite")
    return T, rho


def _species_roots(model: MixtureModel, T, total_rho):
    """Closed-form roots of ``dg_i/dp (T, p_i) = 1/total_rho`` per species."""
    ref = model.ref
    T = np.asarray(T, dtype=float)[..., None]
    rho = np.asarray(total_rho, dtype=float)[..., None]
    out = []
    for sp in model.species:
        if sp.variant is Variant.TAIT:
            e = 1.0 / (1.0 - sp.beta)
            out.append(ref.p0 * (rho / sp.rhoR) ** e * (T / ref.T0) ** (sp.alpha * e))
        else:
            out.append(ref.p0 * rho * T / (sp.rhoR * ref.T0))
    return np.concatenate(out, axis=-1)


def p_bounds(model: MixtureModel, T, total_rho):
    """Return ``(p_min, p_max)`` enclosing the mixture pressure."""
    roots = _species_roots(model, T, total_rho)
    return roots.min(axis=-1), roots.max(axis=-1)


def _pressure(model: MixtureModel, T, rho, p_guess=None):
    T = np.asarray(T, dtype=float)
    total = rho.sum(axis=-1)
    pmin, pmax = p_bounds(model, T, total)
    slo = np.log(pmin) - 1e-12
    shi = np.log(pmax) + 1e-12
    if p_guess is None:
        s0 = 0.5 * (slo + shi)
    else:
        s0 = np.clip(np.log(p_guess), slo, shi)

    def fun(s):
        p = np.exp(s)
        gp = model.gp(T, p)
        srho = (rho * gp).sum(axis=-1)
        # d/ds of ln(sum rho gp); every gp_i is a power law in p
        dsr = (rho * gp * _gp_log_slope(model)).sum(axis=-1)
        return np.log(srho), dsr / srho

    s = solve_monotone(fun, s0, lo=slo, hi=shi, increasing=False, tol=PRESSURE_TOL, what="pressure")
    return np.exp(s)


def _gp_log_slope(model: MixtureModel):
    """``d ln(gp_i) / d ln p``: ``beta_i - 1`` for Tait, ``-1`` for ideal gases."""
    return np.array([sp.beta - 1.0 if sp.variant is Variant.TAIT else -1.0 for sp in model.species])


def pressure(model: MixtureModel, T, rho):
    """Mixture pressure, the unique root of ``sum_i rho_i dg_i/dp (T, p) = 1``."""
    T, rho = _check_state(model, T, rho)
    return _pressure(model, T, rho)


@dataclass(frozen=True, eq=False)
class _Eval:
    T: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    d: GibbsDerivs
    H: np.ndarray          # species enthalpies including g0
    lnx: np.ndarray        # log mole fractions
    n: np.ndarray          # rho_i / M_i


def _evaluate(model: MixtureModel, T, rho, p=None) -> _Eval:
    T = np.asarray(T, dtype=float)
    if p is None:
        p = _pressure(model, T, rho)
    d = model.derivs(T, p)
    H = model.enthalpy0(T, p) + model.g0
    n = rho / model.M
    lnx = np.log(n) - np.log(n.sum(axis=-1, keepdims=True))
    return _Eval(T, rho, p, d, H, lnx, n)


def free_energy(model: MixtureModel, T, rho):
    """Helmholtz free energy density ``rho psi``."""
    T, rho = _check_state(model, T, rho)
    e = _evaluate(model, T, rho)
    return (e.d.g * rho).sum(-1) - e.p + T * (e.n * e.lnx).sum(-1)


def _internal_energy(e: _Eval):
    return (e.rho * e.H).sum(-1) - e.p


def internal_energy(model: MixtureModel, T, rho):
    """Internal energy density ``rho u = sum_i rho_i H_i - p``."""
    T, rho = _check_state(model, T, rho)
    return _internal_energy(_evaluate(model, T, rho))


def _entropy_neg(e: _Eval):
    return (e.d.gT * e.rho).sum(-1) + (e.n * e.lnx).sum(-1)


def entropy_density_neg(model: MixtureModel, T, rho):
    """Negative entropy density ``-rho s``."""
    T, rho = _check_state(model, T, rho)
    return _entropy_neg(_evaluate(model, T, rho))


def _heat_capacity(e: _Eval):
    r = e.rho
    sTT = (e.d.gTT * r).sum(-1)
    sTp = (e.d.gTp * r).sum(-1)
    spp = (e.d.gpp * r).sum(-1)
    return -(e.T / r.sum(-1)) * (sTT - sTp**2 / spp)


def heat_capacity(model: MixtureModel, T, rho):
    """Mass-specific isochoric heat capacity of the mixture."""
    T, rho = _check_state(model, T, rho)
    cv = _heat_capacity(_evaluate(model, T, rho))
    if np.any(cv <= 0):
        raise ConsistencyError("non-positive mixture heat capacity")
    return cv


def _chemical_potentials(model: MixtureModel, e: _Eval):
    return e.d.g + (e.T[..., None] / model.M) * e.lnx


def chemical_potentials(model: MixtureModel, T, rho):
    """``mu_i = g_i(T, p) + (T/M_i) ln x_i``."""
    T, rho = _check_state(model, T, rho)
    return _chemical_potentials(model, _evaluate(model, T, rho))


def volume_fractions(model: MixtureModel, T, rho):
    T, rho = _check_state(model, T, rho)
    e = _evaluate(model, T, rho)
    return rho * e.d.gp


def pressure_T_derivative(e: _Eval):
    """``dp/dT`` at fixed partial densities."""
    return -(e.d.gTp * e.rho).sum(-1) / (e.d.gpp * e.rho).sum(-1)


def energy_rho_derivative(e: _Eval):
    """``d(rho u)/d rho_i`` at fixed ``T``."""
    spp = (e.d.gpp * e.rho).sum(-1, keepdims=True)
    sTp = (e.d.gTp * e.rho).sum(-1, keepdims=True)
    return e.H + e.T[..., None] * e.d.gp * sTp / spp


def free_energy_hessian(model: MixtureModel, e: _Eval):
    """Second derivatives of ``rho psi`` in the partial densities at fixed T."""
    gp = e.d.gp
    spp = (e.d.gpp * e.rho).sum(-1)[..., None, None]
    M = model.M
    ntot = e.n.sum(-1)[..., None, None]
    eye = np.eye(model.N)
    mix = (M[:, None] * eye / e.rho[..., :, None] - 1.0 / ntot) / (M[:, None] * M[None, :])
    return -gp[..., :, None] * gp[..., None, :] / spp + e.T[..., None, None] * mix


def _temperature(model: MixtureModel, rho, rhou, T_guess=None):
    rho = np.asarray(rho, dtype=float)
    rhou = np.asarray(rhou, dtype=float)
    emin = (model.g0 * rho).sum(-1)
    excess = rhou - emin
    if not np.all(excess > 0):
        raise DomainError("internal energy must exceed sum_i g0_i rho_i")
    target = np.log(excess)
    total = rho.sum(-1)
    s0 = np.log(excess / total) if T_guess is None else np.log(np.asarray(T_guess, float))
    s0 = np.broadcast_to(s0, target.shape)
    cache = {"p": None}

    def fun(s):
        T = np.exp(s)
        p = _pressure(model, T, rho, cache["p"])
        cache["p"] = p
        e = _evaluate(model, T, rho, p)
        ex = (rho * (e.H - model.g0)).sum(-1) - p
        dex = total * _heat_capacity(e) * T
        return np.log(ex) - target, dex / ex

    s = solve_monotone(fun, s0, tol=TEMPERATURE_TOL, what="temperature")
    return np.exp(s)


def temperature_from_energy(model: MixtureModel, rho, rhou):
    """Temperature at which the internal energy density equals ``rhou``."""
    rho = np.asarray(rho, dtype=float)
    if not (np.all(rho > 0) and np.all(np.isfinite(rho))):
        raise DomainError("partial densities must be positive and finite")
    return _temperature(model, rho, rhou)


# --- entropy functional h(w) = -rho s as a function of conserved variables ---

def _split(model: MixtureModel, w):
    if isinstance(w, ConservedState):
        rho, rhou = np.asarray(w.rho, float), np.asarray(w.rhou, float)
    else:
        w = np.asarray(w, dtype=float)
        rho, rhou = w[..., :-1], w[..., -1]
    if rho.shape[-1:] != (model.N,):
        raise DomainError(f"conserved vector must have {model.N} densities plus the energy")
    if not (np.all(rho > 0) and np.all(np.isfinite(rho))):
        raise DomainError("partial densities must be positive and finite")
    return rho, rhou


def _primal_from_conserved(model: MixtureModel, w) -> _Eval:
    rho, rhou = _split(model, w)
    T = _temperature(model, rho, rhou)
    return _evaluate(model, T, rho)


def entropy_h(model: MixtureModel, w):
    """``h(w) = -rho s`` evaluated at the temperature implied by ``w``."""
    return _entropy_neg(_primal_from_conserved(model, w))


def _grad_h(model: MixtureModel, e: _Eval):
    mu = _chemical_potentials(model, e)
    T = e.T[..., None]
    return np.concatenate([mu / T, -1.0 / T], axis=-1)


def grad_h(model: MixtureModel, w):
    """Entropic variables ``(mu/T, -1/T)`` as a :class:`~mixflow.dual.DualState`."""
    from .dual import DualState
    return DualState(_grad_h(model, _primal_from_conserved(model, w)))


def _hess_h(model: MixtureModel, e: _Eval):
    N = model.N
    T = e.T[..., None, None]
    rcv = e.rho.sum(-1)[..., None, None] * _heat_capacity(e)[..., None, None]
    dT = -energy_rho_derivative(e) / rcv[..., 0]       # d T_hat / d rho_i
    out = np.empty(e.rho.shape[:-1] + (N + 1, N + 1))
    out[..., :N, :N] = free_energy_hessian(model, e) / T + rcv / T**2 * dT[..., :, None] * dT[..., None, :]
    col = dT / T[..., 0]**2
    out[..., :N, N] = col
    out[..., N, :N] = col
    out[..., N, N] = 1.0 / (rcv[..., 0, 0] * e.T**2)
    # exact symmetry; the analytic blocks agree only to round-off
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def hess_h(model: MixtureModel, w):
    """Hessian of ``h`` with respect to ``w = (rho, rho u)``."""
    return _hess_h(model, _primal_from_conserved(model, w))


def conserved_from_primal(model: MixtureModel, T, rho) -> ConservedState:
    T, rho = _check_state(model, T, rho)
    return ConservedState(rho, _internal_energy(_evaluate(model, T, rho)))


def make_model(species: Sequence[SpeciesParams], ref: Optional[ReferenceState] = None) -> MixtureModel:
    return MixtureModel(tuple(species), ref or ReferenceState())
