"""One-dimensional solver for the transformed mixture equations.

Unknowns live at cell centres of a uniform grid on ``[0, L]``: the total
density ``varrho``, the entropic coordinates ``q`` (``q_N = -1/T``) and the
velocity ``v``.  One time step runs a fixed-point loop around three
linear subproblems with frozen ``(q*, v*)``:

1. explicit first-order upwind transport of ``varrho``;
2. an implicit Euler, block-tridiagonal solve for ``q`` with
   ``R_q(varrho, q*)`` as storage matrix and ``Mtilde(varrho, q*)`` as
   diffusion matrix;
3. an implicit Euler, tridiagonal solve for ``v`` with the viscous stress.

All balance laws are written in flux-difference form.  The storage term
of the ``q`` equation carries the defect ``R(varrho, q*) - R^n`` so that
at the fixed point the discrete scheme conserves each ``int rho_i`` and,
together with the kinetic-energy bookkeeping of the momentum solve, the
total energy ``int (rho u + rho v^2/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .entropic import Basis, EntropicEval, R_jacobian, R_of, evaluate
from .errors import DomainError, MixflowError, ValidationError
from .mixture import MixtureModel, _entropy_neg, _evaluate, _grad_h
from .transport import Mtilde, OnsagerInputs, PowerLaw, build_onsager, force_projection


class SolverError(MixflowError):
    """Base class for time-stepping failures; carries the failure time."""

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t
        self.partial: Optional["RunResult"] = None

    def __str__(self):
        base = super().__str__()
        return base if self.t is None else f"{base} (t={self.t:.17g})"


class DomainExit(SolverError):
    """The state left the admissible set: varrho <= 0 or q_N >= 0 somewhere."""


class FixedPointDiverged(SolverError):
    """The per-step fixed-point iteration did not converge."""


class CFLViolation(SolverError):
    """The advective CFL number exceeded the configured limit."""


@dataclass(frozen=True)
class Grid1D:
    L: float
    J: int

    def __post_init__(self):
        if self.J < 8:
            raise ValidationError("grid needs at least 8 cells")
        if not self.L > 0:
            raise ValidationError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.J

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.J) + 0.5) * self.dx


@dataclass(frozen=True, eq=False)
class FieldState:
    varrho: np.ndarray
    q: np.ndarray
    v: np.ndarray
    t: float = 0.0
    # warm start for the scalar potential; does not affect results beyond round-off
    Mscalar: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RobinCooling:
    """Outward heat flux ``alpha (T - T_ext)`` at both walls."""

    alpha: float
    T_ext: float


@dataclass(frozen=True)
class BoundarySpec:
    """No-slip walls with mass/energy exchange.

    ``flux(side, t, T, rho)`` returns the outward normal flux
    ``(nu.J^1, ..., nu.J^N, nu.J^h)`` at ``side`` in ``{"left", "right"}``;
    its mass components must sum to zero.  ``robin`` adds a cooling law.
    """

    robin: Optional[RobinCooling] = None
    flux: Optional[Callable] = None

    def outward_flux(self, side: str, t: float, T: float, rho: np.ndarray) -> np.ndarray:
        N = rho.shape[-1]
        out = np.zeros(N + 1)
        if self.flux is not None:
            out += np.asarray(self.flux(side, t, T, rho), dtype=float)
            if abs(out[:N].sum()) > 1e-12 * max(1.0, np.abs(out[:N]).max()):
                raise ValidationError("boundary mass fluxes must sum to zero")
        if self.robin is not None:
            out[N] += self.robin.alpha * (T - self.robin.T_ext)
        return out


@dataclass(frozen=True)
class SolverInputs:
    """Transport closures plus viscosities and optional source hooks.

    ``forces(x, t)`` returns ``(J, N)`` body forces per unit mass,
    ``reactions(T, rho)`` returns ``(J, N)`` production rates (projected
    onto zero total).
    """

    onsager: OnsagerInputs = OnsagerInputs()
    eta: Callable = PowerLaw(0.0)
    lam: Callable = PowerLaw(0.0)
    forces: Optional[Callable] = None
    reactions: Optional[Callable] = None


@dataclass(frozen=True)
class StepConfig:
    dt: float
    fp_tol: float = 1e-9
    fp_maxiter: int = 50
    cfl_max: float = 0.5
    k_levels: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not 0 < self.cfl_max <= 1:
            raise ValidationError("cfl_max must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class Diagnostics:
    t: float
    mass: np.ndarray
    energy: float
    entropy: float
    sup_qN: float
    min_rho: float
    max_T: float
    fp_iters: int
    truncation: Tuple[float, ...] = ()
    fp_changes: Tuple[float, ...] = ()


def diagnostics_truncation(state: FieldState, model: MixtureModel, basis: Basis, k_levels: Sequence[float],
                           grid: Grid1D, ev: Optional[EntropicEval] = None) -> Tuple[float, ...]:
    """``E_k = sum_j varrho_j ((rho u)_j - k)_+^2 dx`` for each level ``k``."""
    if ev is None:
        ev = evaluate(model, basis, state.varrho, state.q, M_guess=state.Mscalar, hessian=False)
    eps = ev.rhou
    return tuple(float((state.varrho * np.maximum(eps - k, 0.0) ** 2).sum() * grid.dx) for k in k_levels)


def init_from_primal(model: MixtureModel, basis: Basis, grid: Grid1D, T0, rho0, v0=None) -> FieldState:
    """Field state from temperature, partial densities and velocity profiles."""
    J = grid.J
    T0 = np.broadcast_to(np.asarray(T0, dtype=float), (J,))
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape == (model.N, J):
        rho0 = rho0.T
    rho0 = np.broadcast_to(rho0, (J, model.N))
    v0 = np.zeros(J) if v0 is None else np.broadcast_to(np.asarray(v0, dtype=float), (J,))
    if not (np.all(T0 > 0) and np.all(rho0 > 0)):
        raise DomainError("initial temperature and densities must be positive")
    ws = _grad_h(model, _evaluate(model, T0, rho0))
    q = ws @ basis.eta[: basis.N].T
    q[:, -1] = -1.0 / T0
    state = FieldState(rho0.sum(-1), q, v0.copy(), 0.0)
    ev = evaluate(model, basis, state.varrho, state.q, hessian=False)
    return replace(state, Mscalar=ev.Mscalar)


def _faces(c: np.ndarray) -> np.ndarray:
    """Arithmetic means at the J-1 interior faces."""
    return 0.5 * (c[:-1] + c[1:])


def _upwind(vf: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Upwind flux ``vf * c`` at all J+1 faces (zero normal velocity at walls)."""
    out = np.zeros((vf.shape[0],) + c.shape[1:])
    vi = vf[1:-1]
    left, right = c[:-1], c[1:]
    sel = (vi > 0).reshape((-1,) + (1,) * (c.ndim - 1))
    out[1:-1] = np.where(sel, left, right) * vi.reshape(sel.shape)
    return out


def _banded_index(J: int, N: int):
    """Index arrays placing block entries into LAPACK banded storage."""
    bw = 2 * N - 1
    j, a, b = np.meshgrid(np.arange(J), np.arange(N), np.arange(N), indexing="ij")
    r = j * N + a
    cd = j * N + b
    diag_idx = (bw + r - cd, cd)
    jo = j[:-1]
    ro = r[:-1]
    cu = (jo + 1) * N + b[:-1]
    upper_idx = (bw + ro - cu, cu)
    # lower block (j+1, j) is the transpose of the upper block
    rl = (jo + 1) * N + a[:-1]
    cl = jo * N + b[:-1]
    lower_idx = (bw + rl - cl, cl)
    return bw, diag_idx, upper_idx, lower_idx


def _tridiag_solve(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return solve_banded((1, 1), ab, rhs)


class Solver:
    """Time stepper bound to a model, closures, boundary data and grid."""

    def __init__(self, model: MixtureModel, basis: Basis, inputs: SolverInputs, bc: BoundarySpec,
                 grid: Grid1D, cfg: StepConfig):
        if basis.N != model.N:
            raise ValidationError("basis dimension does not match the number of species")
        self.model, self.basis, self.inputs, self.bc, self.grid, self.cfg = model, basis, inputs, bc, grid, cfg
        self._band = _banded_index(grid.J, model.N)
        self._cache = None

    # -- helpers -------------------------------------------------------------

    def _evaluate(self, varrho, q, M_guess=None, p_guess=None, hessian=True) -> EntropicEval:
        return evaluate(self.model, self.basis, varrho, q, M_guess=M_guess, p_guess=p_guess, hessian=hessian)

    def _state_eval(self, state: FieldState) -> EntropicEval:
        c = self._cache
        if c is not None and c[0] is state:
            return c[1]
        return self._evaluate(state.varrho, state.q, state.Mscalar)

    def _viscosity(self, ev: EntropicEval) -> np.ndarray:
        eta = np.broadcast_to(self.inputs.eta(ev.T, ev.rho), ev.T.shape)
        lam = np.broadcast_to(self.inputs.lam(ev.T, ev.rho), ev.T.shape)
        mu = 2.0 * eta + lam
        if np.any(mu < 0):
            raise ValidationError("2 eta + lambda must be non-negative")
        return mu

    def diagnostics(self, state: FieldState, ev: EntropicEval, fp_iters: int = 0,
                    fp_changes: Sequence[float] = ()) -> Diagnostics:
        dx = self.grid.dx
        kinetic = 0.5 * state.varrho * state.v**2
        return Diagnostics(
            t=state.t,
            mass=ev.rho.sum(0) * dx,
            energy=float((ev.rhou + kinetic).sum() * dx),
            entropy=float(-_entropy_neg(ev.e).sum() * dx),
            sup_qN=float(state.q[:, -1].max()),
            min_rho=float(state.varrho.min()),
            max_T=float(ev.T.max()),
            fp_iters=fp_iters,
            truncation=diagnostics_truncation(state, self.model, self.basis, self.cfg.k_levels, self.grid, ev),
            fp_changes=tuple(fp_changes),
        )

    # -- one step ------------------------------------------------------------

    def step(self, state: FieldState, dt: Optional[float] = None) -> Tuple[FieldState, Diagnostics]:
        cfg = self.cfg
        dt = cfg.dt if dt is None else dt
        model, basis, grid = self.model, self.basis, self.grid
        J, N, dx = grid.J, model.N, grid.dx
        t_new = state.t + dt
        Q = basis.Q

        ev_n = self._state_eval(state)
        rho_n, v_n, varrho_n = ev_n.rho, state.v, state.varrho
        R_n = R_of(ev_n, basis)
        forces = None if self.inputs.forces is None else np.broadcast_to(
            np.asarray(self.inputs.forces(grid.x, t_new), dtype=float), (J, N))

        q_s, v_s = state.q.copy(), state.v.copy()
        M_guess, p_guess = ev_n.Mscalar, ev_n.p
        changes: List[float] = []
        for it in range(1, cfg.fp_maxiter + 1):
            cfl = np.abs(v_s).max() * dt / dx
            if cfl > cfg.cfl_max:
                raise CFLViolation(f"CFL number {cfl:.3g} exceeds {cfg.cfl_max:g}", t_new)

            vf = np.zeros(J + 1)
            vf[1:-1] = _faces(v_s)

            # (a) total density by explicit upwind transport
            varrho = varrho_n - dt / dx * np.diff(_upwind(vf, varrho_n))
            if np.any(varrho <= 0):
                raise DomainExit("varrho <= 0", t_new)

            # (b) entropic coordinates
            try:
                ev = self._evaluate(varrho, q_s, M_guess, p_guess)
            except DomainError as exc:
                raise DomainExit(str(exc), t_new) from exc
            M_guess, p_guess = ev.Mscalar, ev.p
            A = R_jacobian(model, basis, ev)
            R_s = R_of(ev, basis)
            mats = build_onsager(self.inputs.onsager, ev.T, ev.rho)
            Mt = Mtilde(basis, mats)
            Mt_f = _faces(Mt)

            mu = self._viscosity(ev)
            mu_f = np.empty(J + 1)
            mu_f[1:-1] = _faces(mu)
            mu_f[0], mu_f[-1] = mu[0], mu[-1]
            h_f = np.full(J + 1, dx)
            h_f[0] = h_f[-1] = 0.5 * dx

            # energy production per cell (already multiplied by dx)
            P = ev.p
            work = -P * np.diff(vf)
            vpad = np.concatenate([[0.0], v_s, [0.0]])
            dv_f = np.diff(vpad)
            heat_f = mu_f * dv_f**2 / h_f
            visc = 0.5 * (heat_f[:-1] + heat_f[1:])
            visc[0] += 0.5 * heat_f[0]
            visc[-1] += 0.5 * heat_f[-1]
            vg = np.concatenate([[-v_s[0]], v_s, [-v_s[-1]]])
            conv = -varrho * v_s * (vg[2:] - vg[:-2]) / (2.0 * dx)
            FK = _upwind(vf, 0.5 * varrho_n * v_n**2)
            ke_defect = -(v_s * conv * dx
                          + 0.5 * (varrho - varrho_n) * v_n**2 * dx / dt
                          - 0.5 * varrho * (v_s - v_n) ** 2 * dx / dt) - np.diff(FK)
            prod = np.zeros((J, N + 1))
            prod[:, N] = work + visc + ke_defect

            # force-driven part of the diffusion flux, lagged
            B_f = np.zeros((J + 1, N))
            if forces is not None:
                bt = force_projection(basis, forces[:, :, None])[:, :, 0]
                qN_f = _faces(q_s[:, -1])
                B_f[1:-1] = -np.einsum("fij,fj->fi", Mt_f, qN_f[:, None] * _faces(bt))
                # J:b at cells from the face fluxes in w-space
                Jw_f = np.zeros((J + 1, N + 1))
                grad_q = np.diff(q_s, axis=0) / dx
                Mext_f = _faces(mats.Mext)
                Jw_f[1:-1] = -np.einsum("fij,fj->fi", Mext_f,
                                        (grad_q + qN_f[:, None] * _faces(bt)) @ Q.T)
                Jc = 0.5 * (Jw_f[:-1] + Jw_f[1:])
                prod[:, N] += (Jc[:, :N] * forces).sum(-1) * dx
            if self.inputs.reactions is not None:
                r = np.asarray(self.inputs.reactions(ev.T, ev.rho), dtype=float)
                r = r - r.mean(-1, keepdims=True)
                prod[:, :N] += r * dx

            # wall fluxes in R-space (outward normal)
            Phi_L = Q.T @ self.bc.outward_flux("left", t_new, ev.T[0], ev.rho[0])
            Phi_R = Q.T @ self.bc.outward_flux("right", t_new, ev.T[-1], ev.rho[-1])

            adv = _upwind(vf, R_n)
            rhs = (dx / dt) * (np.einsum("jab,jb->ja", A, q_s) - (R_s - R_n)) - np.diff(adv, axis=0) \
                + prod @ Q - np.diff(B_f, axis=0)
            rhs[0] -= Phi_L
            rhs[-1] -= Phi_R

            diag = (dx / dt) * A
            diag[:-1] += Mt_f / dx
            diag[1:] += Mt_f / dx
            off = -Mt_f / dx
            q_new = self._solve_q(diag, off, rhs)
            if not np.all(np.isfinite(q_new)):
                raise FixedPointDiverged("non-finite iterate in the q solve", t_new)
            if np.any(q_new[:, -1] >= 0):
                raise DomainExit("q_N >= 0", t_new)

            # (c) velocity
            Pg = np.concatenate([[P[0]], P, [P[-1]]])
            f_dx = -0.5 * (Pg[2:] - Pg[:-2]) + conv * dx
            if forces is not None:
                f_dx = f_dx + (ev.rho * forces).sum(-1) * dx
            coef = mu_f / h_f
            vdiag = (dx / dt) * varrho + coef[:-1] + coef[1:]
            v_new = _tridiag_solve(vdiag, -coef[1:-1], (dx / dt) * varrho * v_n + f_dx)

            qscale = max(np.abs(q_new).max(), np.finfo(float).tiny)
            vscale = max(np.abs(v_new).max(), np.sqrt((P / varrho).max()))
            change = max(np.abs(q_new - q_s).max() / qscale, np.abs(v_new - v_s).max() / vscale)
            changes.append(float(change))
            q_s, v_s = q_new, v_new
            if change <= cfg.fp_tol:
                break
        else:
            raise FixedPointDiverged(f"no convergence in {cfg.fp_maxiter} iterations "
                                     f"(last change {changes[-1]:.3g})", t_new)

        try:
            ev_new = self._evaluate(varrho, q_s, M_guess, p_guess)
        except DomainError as exc:
            raise DomainExit(str(exc), t_new) from exc
        new = FieldState(varrho, q_s, v_s, t_new, ev_new.Mscalar)
        self._cache = (new, ev_new)
        return new, self.diagnostics(new, ev_new, it, changes)

    def _solve_q(self, diag, off, rhs):
        J, N = rhs.shape
        bw, di, ui, li = self._band
        ab = np.zeros((2 * bw + 1, J * N))
        ab[di] = diag
        ab[ui] = off
        ab[li] = np.swapaxes(off, -1, -2)
        return solve_banded((bw, bw), ab, rhs.reshape(-1)).reshape(J, N)

    def run(self, state0: FieldState, t_end: float, snapshot_every: int = 0,
            max_halvings: int = 3) -> "RunResult":
        """Advance to ``t_end``; failing steps are retried with halved ``dt``."""
        ev0 = self._state_eval(state0)
        diags = [self.diagnostics(state0, ev0)]
        snaps = [state0] if snapshot_every else []
        state = state0
        n = 0
        tol = 1e-12 * max(1.0, abs(t_end))
        try:
            while state.t < t_end - tol:
                dt = min(self.cfg.dt, t_end - state.t)
                for attempt in range(max_halvings + 1):
                    try:
                        state, d = self._substeps(state, dt, 2**attempt)
                        break
                    except FixedPointDiverged:
                        if attempt == max_halvings:
                            raise
                n += 1
                diags.append(d)
                if snapshot_every and n % snapshot_every == 0:
                    snaps.append(state)
        except SolverError as exc:
            # keep what was computed before the failure
            exc.partial = RunResult(snaps, diags)
            raise
        if snapshot_every and snaps[-1] is not state:
            snaps.append(state)
        return RunResult(snaps, diags)

    def _substeps(self, state, dt, k):
        d = None
        for _ in range(k):
            state, d = self.step(state, dt / k)
        return state, d


@dataclass
class RunResult:
    snapshots: List[FieldState]
    diagnostics: List[Diagnostics]


def step(model, basis, inputs, bc, state, cfg, grid) -> Tuple[FieldState, Diagnostics]:
    return Solver(model, basis, inputs, bc, grid, cfg).step(state)


def run(model, basis, inputs, bc, state0, cfg, grid, t_end, snapshot_every=0) -> RunResult:
    return Solver(model, basis, inputs, bc, grid, cfg).run(state0, t_end, snapshot_every)


def snapshot_table(model: MixtureModel, basis: Basis, grid: Grid1D, state: FieldState) -> np.ndarray:
    """Columns ``x, varrho, q_1..q_N, v, T, rho_1..rho_N, p``."""
    ev = evaluate(model, basis, state.varrho, state.q, M_guess=state.Mscalar, hessian=False)
    return np.column_stack([grid.x, state.varrho, state.q, state.v, ev.T, ev.rho, ev.p])
