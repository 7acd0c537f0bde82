"""Parabolic-hyperbolic change of variables ``w* <-> (varrho, q)``.

The entropic variables are expanded in a basis ``xi^1, ..., xi^{N+1}`` of
R^{N+1}:  ``w* = sum_{l<=N} q_l xi^l + Mscalar xi^{N+1}``.  ``xi^N`` is the
temperature direction ``e_{N+1}`` and ``xi^{N+1} = (1, ..., 1, 0)`` the
total-mass direction; the remaining vectors span relative chemical
potentials.  ``Mscalar`` is fixed by requiring the total density of
``grad h*(w*)`` to equal ``varrho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dual import DualState, hess_blocks, solve_dual, xi_quadratic, _hstar
from .errors import DomainError, OverflowGuardError
from .mixture import (ConservedState, MixtureModel, MixtureState, _Eval, _chemical_potentials,
                      _evaluate, _grad_h, _internal_energy, _primal_from_conserved)
from .roots import solve_monotone

M_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class Basis:
    """Rows of ``xi`` and ``eta`` are the basis vectors ``xi^k`` and ``eta^k``."""

    xi: np.ndarray
    eta: np.ndarray
    Q: np.ndarray

    @property
    def N(self) -> int:
        return self.Q.shape[1]


def build_basis(N: int) -> Basis:
    if int(N) != N or N < 2:
        raise ValueError(f"entropic coordinates need N >= 2 species, got {N}")
    N = int(N)
    xi = np.zeros((N + 1, N + 1))
    for i in range(N - 1):
        v = np.zeros(N + 1)
        v[i], v[N - 1] = 1.0, -1.0
        for k in range(i):
            v -= (v @ xi[k]) * xi[k]
        xi[i] = v / np.linalg.norm(v)
    xi[N - 1, N] = 1.0
    xi[N, :N] = 1.0
    eta = np.linalg.inv(xi).T
    # The dual vectors have closed forms; remove inversion round-off.
    eta[N - 1] = 0.0
    eta[N - 1, N] = 1.0
    eta[N] = xi[N] / N
    eta[: N - 1] = xi[: N - 1]
    return Basis(xi, eta, xi[:N].T.copy())


def relative_potential_matrix(basis: Basis) -> np.ndarray:
    """Matrix ``C`` with ``(mu_i - mu_N)/T = sum_l C[i, l] q_l`` for ``i, l < N``."""
    N = basis.N
    diff = np.eye(N + 1)[: N - 1] - np.eye(N + 1)[N - 1]
    return diff @ basis.xi[: N - 1].T


@dataclass(frozen=True, eq=False)
class EntropicState:
    varrho: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "varrho", np.asarray(self.varrho, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))


def _check(state: EntropicState, basis: Basis):
    if state.q.shape[-1:] != (basis.N,):
        raise DomainError(f"q must have trailing length {basis.N}")
    if not np.all(state.varrho > 0):
        raise DomainError("total density must be positive")
    if not np.all(state.q[..., -1] < 0):
        raise DomainError("q_N must be negative")


def to_entropic(model: MixtureModel, basis: Basis, w) -> EntropicState:
    e = _primal_from_conserved(model, w)
    ws = _grad_h(model, e)
    return EntropicState(e.rho.sum(-1), ws @ basis.eta[: basis.N].T)


@dataclass(frozen=True, eq=False)
class EntropicEval:
    """Everything the solver needs at one set of ``(varrho, q)`` values."""

    varrho: np.ndarray
    q: np.ndarray
    Mscalar: np.ndarray
    wstar: np.ndarray
    e: _Eval
    rhou: np.ndarray
    D: Optional[np.ndarray]

    @property
    def T(self):
        return self.e.T

    @property
    def rho(self):
        return self.e.rho

    @property
    def p(self):
        return self.e.p


def _initial_M(model: MixtureModel, basis: Basis, varrho, q):
    T = -1.0 / q[..., -1]
    rho = np.repeat((varrho / model.N)[..., None], model.N, axis=-1)
    mu = _chemical_potentials(model, _evaluate(model, T, rho))
    return (mu / T[..., None]).mean(-1)


def _solve_M(model, basis, varrho, q, M_guess=None, p_guess=None):
    base = q @ basis.xi[: basis.N]
    xiN1 = basis.xi[basis.N]
    target = np.log(varrho)
    m0 = _initial_M(model, basis, varrho, q) if M_guess is None else np.broadcast_to(M_guess, varrho.shape)
    cache = {"p": p_guess, "e": None}

    def fun(m):
        ws = base + m[..., None] * xiN1
        # states outside the representable range show up as NaN residuals
        # and make the iteration back off
        e = solve_dual(model, ws, cache["p"], strict=False)
        cache["p"], cache["e"] = np.where(np.isfinite(e.p), e.p, 1.0), e
        total = e.rho.sum(-1)
        return np.log(total) - target, xi_quadratic(model, e) / total

    m = solve_monotone(fun, m0, tol=M_TOL, max_step=2.0, x_limit=np.inf, what="Mscalar")
    # The last residual evaluation happened at the returned iterate.
    ws = base + m[..., None] * xiN1
    e = cache["e"]
    if not np.all(np.isfinite(e.rho)):
        raise OverflowGuardError("entropic state implies densities outside the representable range")
    return m, ws, e


def evaluate(model: MixtureModel, basis: Basis, varrho, q, *, M_guess=None, p_guess=None,
             hessian: bool = True) -> EntropicEval:
    """Reconstruct the full thermodynamic state from ``(varrho, q)``."""
    state = EntropicState(varrho, q)
    _check(state, basis)
    m, ws, e = _solve_M(model, basis, state.varrho, state.q, M_guess, p_guess)
    D = hess_blocks(model, e) if hessian else None
    return EntropicEval(state.varrho, state.q, m, ws, e, _internal_energy(e), D)


def scalar_M(model: MixtureModel, basis: Basis, varrho, q, M_guess=None):
    """The shift ``Mscalar`` along ``xi^{N+1}`` matching the total density."""
    state = EntropicState(varrho, q)
    _check(state, basis)
    return _solve_M(model, basis, state.varrho, state.q, M_guess)[0]


def from_entropic(model: MixtureModel, basis: Basis, state: EntropicState):
    ev = evaluate(model, basis, state.varrho, state.q, hessian=False)
    return DualState(ev.wstar), MixtureState(ev.T, ev.rho), ConservedState(ev.rho, ev.rhou)


def _ev(model, basis, state, hessian=True):
    if isinstance(state, EntropicEval):
        return state
    return evaluate(model, basis, state.varrho, state.q, hessian=hessian)


def R_of(ev: EntropicEval, basis: Basis):
    w = np.concatenate([ev.rho, ev.rhou[..., None]], axis=-1)
    return w @ basis.xi[: basis.N].T


def R_map(model: MixtureModel, basis: Basis, state):
    """``R_k = xi^k . grad h*(w*)`` for ``k = 1..N``; ``R_N`` is ``rho u``."""
    return R_of(_ev(model, basis, state, hessian=False), basis)


def _projections(ev: EntropicEval, basis: Basis):
    N = basis.N
    Q = basis.Q
    xiN1 = basis.xi[N]
    D = ev.D
    QtDQ = Q.T @ D @ Q
    QtDx = (Q.T @ D) @ xiN1
    denom = (D @ xiN1) @ xiN1
    return QtDQ, QtDx, denom


def R_jacobian(model: MixtureModel, basis: Basis, state):
    """``dR/dq`` at fixed ``varrho`` (symmetric positive definite)."""
    ev = _ev(model, basis, state)
    QtDQ, QtDx, denom = _projections(ev, basis)
    return QtDQ - QtDx[..., :, None] * QtDx[..., None, :] / denom[..., None, None]


def R_drho(model: MixtureModel, basis: Basis, state):
    """``dR/dvarrho`` at fixed ``q``."""
    ev = _ev(model, basis, state)
    _, QtDx, denom = _projections(ev, basis)
    return QtDx / denom[..., None]


def M_derivatives(ev: EntropicEval, basis: Basis):
    """``(dMscalar/dvarrho, dMscalar/dq)``."""
    _, QtDx, denom = _projections(ev, basis)
    return 1.0 / denom, -QtDx / denom[..., None]


def P_map(model: MixtureModel, basis: Basis, state):
    """Pressure ``-h*(w*)/q_N``."""
    ev = _ev(model, basis, state, hessian=False)
    return -_hstar(ev.wstar, ev.e) / ev.q[..., -1]


def P_grads(model: MixtureModel, basis: Basis, state):
    """``(dP/dvarrho, dP/dq)``."""
    ev = _ev(model, basis, state)
    qN = ev.q[..., -1]
    hs = _hstar(ev.wstar, ev.e)
    dM_drho, dM_dq = M_derivatives(ev, basis)
    R = R_of(ev, basis)
    dh_dq = R + ev.varrho[..., None] * dM_dq
    dP_dq = -dh_dq / qN[..., None]
    dP_dq[..., -1] += hs / qN**2
    return -ev.varrho * dM_drho / qN, dP_dq
