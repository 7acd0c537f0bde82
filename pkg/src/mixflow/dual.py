"""Legendre conjugate ``h*`` of the negative entropy and its derivatives.

Given entropic variables ``w* = (mu_1/T, ..., mu_N/T, -1/T)`` the conserved
state is recovered by solving a single monotone equation for the pressure,

    1 = sum_i exp(M_i (w*_i - g_i(T, p)/T)),

whose summands are the mole fractions.  Partial densities then follow from
``rho_i = M_i x_i / sum_j M_j x_j dg_j/dp``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError, OverflowGuardError
from .mixture import ConservedState, MixtureModel, _Eval, _evaluate, _internal_energy, _entropy_neg
from .roots import EXP_GUARD, solve_monotone

DUAL_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class DualState:
    """Entropic variables; the last component equals ``-1/T``."""

    wstar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wstar", np.asarray(self.wstar, dtype=float))

    @property
    def T(self):
        return -1.0 / self.wstar[..., -1]


def _as_wstar(model: MixtureModel, wstar) -> np.ndarray:
    ws = wstar.wstar if isinstance(wstar, DualState) else np.asarray(wstar, dtype=float)
    if ws.shape[-1:] != (model.N + 1,):
        raise DomainError(f"dual vector must have length {model.N + 1}")
    if not (np.all(ws[..., -1] < 0) and np.all(np.isfinite(ws))):
        raise DomainError("last entropic variable (-1/T) must be negative and finite")
    return ws


def solve_dual(model: MixtureModel, wstar, p_guess=None, strict: bool = True) -> _Eval:
    """Primal evaluation bundle at the state with entropic variables ``wstar``.

    States whose densities fall outside the floating-point range raise
    :class:`OverflowGuardError`, or come back as NaN when ``strict`` is false.
    """
    ws = _as_wstar(model, wstar)
    T = -1.0 / ws[..., -1]
    Tn = T[..., None]
    M = model.M
    wi = ws[..., :-1]
    s0 = np.zeros(T.shape) if p_guess is None else np.log(np.broadcast_to(p_guess, T.shape))

    def fun(s):
        p = np.exp(s)
        d = model.derivs(T, p)
        z = M * (wi - d.g / Tn)
        lse = logsumexp(z, axis=-1)
        x = softmax(z, axis=-1)
        dlse = -(x * M * d.gp).sum(-1) * p / T
        return lse, dlse

    s = solve_monotone(fun, s0, increasing=False, tol=DUAL_TOL, what="dual pressure", strict=strict)
    p = np.exp(s)
    e = _evaluate(model, T, np.ones(T.shape + (model.N,)), p)
    z = M * (wi - e.d.g / Tn)
    lnx = z - logsumexp(z, axis=-1, keepdims=True)
    lnrho = np.log(M) + lnx - np.log((M * e.d.gp * np.exp(lnx)).sum(-1, keepdims=True))
    out_of_range = ~(np.abs(lnrho) <= EXP_GUARD)
    if np.any(out_of_range) and not strict:
        lnrho = np.where(out_of_range.any(-1, keepdims=True), np.nan, lnrho)
    elif np.any(out_of_range):
        raise OverflowGuardError("dual state implies densities outside the representable range")
    rho = np.exp(lnrho)
    n = rho / M
    return _Eval(T, rho, p, e.d, e.H, np.log(n) - np.log(n.sum(-1, keepdims=True)), n)


def grad_hstar(model: MixtureModel, wstar) -> ConservedState:
    """Conserved variables ``w = grad h*(w*)``."""
    e = solve_dual(model, wstar)
    return ConservedState(e.rho, _internal_energy(e))


def _hstar(ws, e: _Eval):
    w = np.concatenate([e.rho, _internal_energy(e)[..., None]], axis=-1)
    return (ws * w).sum(-1) - _entropy_neg(e)


def hstar_value(model: MixtureModel, wstar):
    ws = _as_wstar(model, wstar)
    return _hstar(ws, solve_dual(model, ws))


def pressure_dual(model: MixtureModel, wstar):
    """Pressure ``T h*(w*)``."""
    ws = _as_wstar(model, wstar)
    return -_hstar(ws, solve_dual(model, ws)) / ws[..., -1]


def hess_blocks(model: MixtureModel, e: _Eval):
    """Hessian of ``h*`` assembled from the closed-form block expressions."""
    N = model.N
    M = model.M
    r, T, d, H = e.rho, e.T, e.d, e.H
    Tn = T[..., None]
    rhoH = (r * H).sum(-1)
    S2 = (d.gp**2 * r * M).sum(-1)[..., None]
    Spp = (d.gpp * r).sum(-1)[..., None]
    out = np.empty(r.shape[:-1] + (N + 1, N + 1))

    a = M * d.gp
    upper = (M * np.eye(N) * 1.0
             - r[..., None, :] * (a[..., :, None] + a[..., None, :])
             + r[..., None, :] * (S2 - Tn * Spp)[..., None])
    ul = r[..., :, None] * upper
    out[..., :N, :N] = 0.5 * (ul + np.swapaxes(ul, -1, -2))

    mgh = (M * r * d.gp * H).sum(-1)[..., None]
    sTp = (r * d.gTp).sum(-1)[..., None]
    col = (r * (M * H - mgh)
           + r * rhoH[..., None] * (-M * d.gp + S2 - Tn * Spp)
           - Tn**2 * r * sTp)
    out[..., :N, N] = col
    out[..., N, :N] = col

    out[..., N, N] = ((M * r * H**2).sum(-1)
                      - 2.0 * rhoH * (M * r * d.gp * H).sum(-1)
                      + rhoH**2 * ((M * r * d.gp**2).sum(-1) - T * (r * d.gpp).sum(-1))
                      - 2.0 * rhoH * T**2 * (r * d.gTp).sum(-1)
                      - T**3 * (r * d.gTT).sum(-1))
    return out


def hess_hstar(model: MixtureModel, wstar):
    return hess_blocks(model, solve_dual(model, wstar))


def xi_quadratic(model: MixtureModel, e: _Eval):
    """Closed form of ``D^2 h* xi^{N+1} . xi^{N+1}`` with ``xi^{N+1} = (1, ..., 1, 0)``."""
    r = e.rho
    total = r.sum(-1)
    return (model.M * r * (1.0 - e.d.gp * total[..., None])**2).sum(-1) + e.T * total**2 * (r * np.abs(e.d.gpp)).sum(-1)


def upper_row_sums(model: MixtureModel, e: _Eval):
    """Closed form of the row sums of the upper-left block."""
    r, M, gp = e.rho, model.M, e.d.gp
    total = r.sum(-1)[..., None]
    S1 = (M * r * gp).sum(-1)[..., None]
    S2 = (M * r * gp**2).sum(-1)[..., None]
    Spp = (r * e.d.gpp).sum(-1)[..., None]
    return r * (M - total * M * gp - S1 + total * S2 - e.T[..., None] * total * Spp)


def mixed_column_sum(model: MixtureModel, e: _Eval):
    """Closed form of ``sum_i d^2 h*/dw*_i dw*_{N+1}``."""
    r, M, gp, H = e.rho, model.M, e.d.gp, e.H
    total = r.sum(-1)
    rhoH = (r * H).sum(-1)
    return ((M * r * H * (1.0 - total[..., None] * gp)).sum(-1)
            + rhoH * ((M * r * gp**2).sum(-1) * total - (M * r * gp).sum(-1))
            - e.T * total * rhoH * (r * e.d.gpp).sum(-1)
            - e.T**2 * total * (r * e.d.gTp).sum(-1))
