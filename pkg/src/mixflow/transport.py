"""Onsager transport closures and the energy-equation coefficients.

The diffusion fluxes ``J^i`` and the heat flux ``J^h`` are driven by the
gradients of the entropic variables through the extended matrix

    Mext = [[M, l], [l^T, kappa]],

with ``M`` symmetric positive semi-definite, ``M 1 = 0`` and ``sum l = 0``.
Thermo-diffusion is closed by ``l = -M ltilde`` and
``kappa = kappatilde + M ltilde . ltilde`` which keeps ``Mext`` PSD.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .dual import hess_blocks, solve_dual
from .entropic import Basis
from .errors import ValidationError
from .mixture import MixtureModel, _heat_capacity, pressure_T_derivative

PSD_RTOL = 1e-10


@dataclass(frozen=True)
class PowerLaw:
    """``coef * T**exponent``; exponents may be given as fractions for the growth checker."""

    coef: float
    exponent: float = 0.0

    def __call__(self, T, rho=None):
        return self.coef * np.asarray(T, dtype=float) ** float(self.exponent)


@dataclass(frozen=True)
class OnsagerInputs:
    """Constitutive inputs for :func:`build_onsager`.

    ``mobility`` is the factor ``d`` of the default mobility matrix (a
    constant or a function of ``T``).  ``ltilde(T, rho)`` returns an
    N-vector, ``kappatilde(T, rho)`` a positive scalar.  ``M_builder``
    replaces the default mobility when given.
    """

    mobility: Union[float, Callable] = 1.0
    kappatilde: Callable = PowerLaw(1.0)
    ltilde: Optional[Callable] = None
    M_builder: Optional[Callable] = None


@dataclass(frozen=True, eq=False)
class OnsagerMatrices:
    M: np.ndarray
    l: np.ndarray
    kappa: np.ndarray
    Mext: np.ndarray


@dataclass(frozen=True, eq=False)
class EnergyCoeffs:
    a0: np.ndarray
    a: np.ndarray
    d0: np.ndarray
    L: np.ndarray
    d0_equiv: np.ndarray
    T2_rho_cv: np.ndarray


def default_M(T, rho, d):
    """``d (diag(rho) - rho rho^T / varrho)``."""
    rho = np.asarray(rho, dtype=float)
    total = rho.sum(-1)[..., None, None]
    d = np.asarray(d(T) if callable(d) else d, dtype=float)
    N = rho.shape[-1]
    base = -rho[..., :, None] * rho[..., None, :] / total
    # diagonal from the off-diagonal row sums so the kernel holds exactly (and N = 1 gives 0)
    off = base * (1.0 - np.eye(N))
    base = off - np.eye(N) * off.sum(-1)[..., :, None]
    return d[..., None, None] * base


def check_mobility(M, rtol: float = PSD_RTOL):
    """Raise unless ``M`` is symmetric PSD of rank N-1 with kernel ``1``."""
    M = np.asarray(M, dtype=float)
    N = M.shape[-1]
    scale = np.maximum(np.abs(M).max(axis=(-2, -1)), np.finfo(float).tiny)
    if np.any(np.abs(M - np.swapaxes(M, -1, -2)).max(axis=(-2, -1)) > rtol * scale):
        raise ValidationError("mobility matrix is not symmetric")
    if np.any(np.abs(M.sum(-1)).max(axis=-1) > rtol * scale * N):
        raise ValidationError("mobility matrix rows do not sum to zero")
    ev = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    if np.any(ev[..., 0] < -rtol * scale):
        raise ValidationError("mobility matrix is not positive semi-definite")
    if N > 1 and np.any(ev[..., 1] <= rtol * scale):
        raise ValidationError("mobility matrix has rank below N-1")


def build_onsager(inputs: OnsagerInputs, T, rho) -> OnsagerMatrices:
    T = np.asarray(T, dtype=float)
    rho = np.asarray(rho, dtype=float)
    N = rho.shape[-1]
    if inputs.M_builder is not None:
        M = np.asarray(inputs.M_builder(T, rho), dtype=float)
        M = np.broadcast_to(M, rho.shape + (N,)).copy()
        check_mobility(M)
    else:
        M = default_M(T, rho, inputs.mobility)
    kt = np.broadcast_to(np.asarray(inputs.kappatilde(T, rho), dtype=float), T.shape)
    if np.any(kt <= 0):
        raise ValidationError("kappatilde must be positive")
    if inputs.ltilde is None:
        lt = np.zeros(rho.shape)
    else:
        lt = np.broadcast_to(np.asarray(inputs.ltilde(T, rho), dtype=float), rho.shape)
    Ml = np.einsum("...ij,...j->...i", M, lt)
    l = -Ml
    kappa = kt + (Ml * lt).sum(-1)
    Mext = np.zeros(rho.shape[:-1] + (N + 1, N + 1))
    Mext[..., :N, :N] = M
    Mext[..., :N, N] = l
    Mext[..., N, :N] = l
    Mext[..., N, N] = kappa
    return OnsagerMatrices(M, l, kappa, Mext)


def Mtilde(basis: Basis, mats: OnsagerMatrices):
    """Projected matrix ``Q^T Mext Q`` acting on gradients of ``q``."""
    Q = basis.Q
    return Q.T @ mats.Mext @ Q


def fluxes_primal(model: MixtureModel, mats: OnsagerMatrices, wstar_grad, b, T):
    """Diffusion and heat fluxes from gradients of ``(mu/T, -1/T)``.

    ``wstar_grad`` has shape ``(N+1, dim)``, ``b`` shape ``(N, dim)``.
    """
    N = model.N
    G = np.asarray(wstar_grad, dtype=float)
    b = np.zeros((N, G.shape[-1])) if b is None else np.asarray(b, dtype=float)
    drive = G[:N] - b / T
    grad_invT = -G[N]
    J = -mats.M @ drive + mats.l[:, None] * grad_invT
    Jh = -mats.l @ drive + mats.kappa * grad_invT
    return J, Jh


def fluxes_entropic(basis: Basis, mats: OnsagerMatrices, q_grad, qN, btilde=None):
    """Fluxes ``-Mext Q (grad q + q_N btilde)`` stacked as ``(N+1, dim)``."""
    G = np.asarray(q_grad, dtype=float)
    if btilde is not None:
        G = G + qN * np.asarray(btilde, dtype=float)
    return -mats.Mext @ (basis.Q @ G)


def force_projection(basis: Basis, b):
    """``btilde^l = eta^l . (b, 0)`` for ``l = 1..N``; ``b`` has shape ``(..., N, dim)``."""
    b = np.asarray(b, dtype=float)
    N = basis.N
    return np.einsum("lk,...kd->...ld", basis.eta[:N, :N], b)


def energy_coeffs(model: MixtureModel, basis: Basis, wstar, mats: OnsagerMatrices) -> EnergyCoeffs:
    """Coefficients of the energy equation written in ``(eps, varrho, q)``."""
    e = solve_dual(model, wstar)
    D = hess_blocks(model, e)
    N = basis.N
    xi = basis.xi
    c = D[..., :, N]
    xiN1 = xi[N]
    denom = (D @ xiN1) @ xiN1
    cx = c @ xiN1
    Dx = D @ xiN1
    a0 = cx / denom
    a = c @ xi[: N - 1].T - cx[..., None] * (Dx @ xi[: N - 1].T) / denom[..., None]
    d0 = D[..., N, N] - cx**2 / denom

    T = e.T
    total = e.rho.sum(-1)
    t2cv = T**2 * total * _heat_capacity(e)
    z = -e.H / T[..., None] ** 2 + e.d.gp * (pressure_T_derivative(e) / T)[..., None]
    A = D[..., :N, :N]
    Az = np.einsum("...ij,...j->...i", A, z)
    A1 = A.sum(-1)
    d0e = t2cv + T**4 * ((Az * z).sum(-1) - (A1 * z).sum(-1) ** 2 / A1.sum(-1))

    lext = np.concatenate([mats.l, np.zeros(mats.l.shape[:-1] + (1,))], axis=-1)
    L = lext @ xi[: N - 1].T
    return EnergyCoeffs(a0, a, d0, L, d0e, t2cv)


def heat_flux_temperature_form(mats: OnsagerMatrices, coeffs: EnergyCoeffs, grad_invT, grad_qbar):
    """``kappa grad(1/T) - L . grad(qbar)``; gradients have a trailing ``dim`` axis."""
    gq = np.asarray(grad_qbar, dtype=float)
    return mats.kappa[..., None] * np.asarray(grad_invT, dtype=float) - np.einsum("...k,...kd->...d", coeffs.L, gq)


def heat_flux_energy_form(mats: OnsagerMatrices, coeffs: EnergyCoeffs, grad_eps, grad_varrho, grad_qbar):
    """The same heat flux driven by ``grad(rho u)`` and ``grad(varrho)``."""
    k_d = (mats.kappa / coeffs.d0)[..., None]
    gq = np.asarray(grad_qbar, dtype=float)
    drive = np.asarray(grad_eps, dtype=float) - coeffs.a0[..., None] * np.asarray(grad_varrho, dtype=float)
    coef = coeffs.L - k_d * coeffs.a
    return -k_d * drive - np.einsum("...k,...kd->...d", coef, gq)
