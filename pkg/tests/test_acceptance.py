"""One test per acceptance criterion; a PASS/FAIL line for each is printed after the run."""

import time
from contextlib import contextmanager
from fractions import Fraction as F

import numpy as np

from conftest import ACCEPTANCE, random_conserved, random_primal, single_ideal, tait_ideal, two_ideal
from mixflow.analysis import CoeffGrowthSpec, check_growth, fit_asymptotics, growth_window
from mixflow.dual import grad_hstar, hess_hstar, hstar_value
from mixflow.entropic import R_jacobian, build_basis, evaluate, to_entropic
from mixflow.mixture import (chemical_potentials, conserved_from_primal, entropy_h, free_energy, grad_h,
                             heat_capacity, hess_h, make_model, pressure)
from mixflow.solver import BoundarySpec, Grid1D, Solver, SolverInputs, StepConfig, init_from_primal
from mixflow.species import SpeciesParams as S, cv_species
from mixflow.transport import (Mtilde, OnsagerInputs, PowerLaw, build_onsager, energy_coeffs,
                               heat_flux_energy_form, heat_flux_temperature_form)

MODELS = {"single ideal gas": single_ideal, "two ideal gases": two_ideal, "Tait + ideal gas": tait_ideal}


@contextmanager
def criterion(k, detail):
    """Record the outcome of criterion ``k``; ``detail`` is a mutable list of strings."""
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        ACCEPTANCE.append((k, ok, "; ".join(detail), time.perf_counter() - t0))


def _relnorm(a, b):
    return float((np.linalg.norm(a - b, axis=-1) / np.linalg.norm(b, axis=-1)).max())


def test_criterion_1_legendre_round_trip():
    detail = ["Legendre round trip"]
    with criterion(1, detail):
        t0 = time.perf_counter()
        worst = 0.0
        for name, make in MODELS.items():
            m = make()
            w = random_conserved(m)
            worst = max(worst, _relnorm(grad_hstar(m, grad_h(m, w).wstar).as_vector(), w))
        secs = time.perf_counter() - t0
        detail.append(f"max rel. error {worst:.2e} over 3 models x 100 states")
        assert worst <= 1e-10
        assert secs < 5.0


def test_criterion_2_hessians():
    detail = ["Hessian agreement"]
    with criterion(2, detail):
        worst_id = worst_h = worst_hs = 0.0
        for make in MODELS.values():
            m = make()
            w = random_conserved(m)
            ws = grad_h(m, w).wstar
            H, Hs = hess_h(m, w), hess_hstar(m, ws)
            worst_id = max(worst_id, float(np.abs(Hs @ H - np.eye(m.N + 1)).sum(-1).max()))
            for k in range(m.N + 1):
                dw = np.zeros_like(w)
                dw[:, k] = 1e-6 * np.abs(w[:, k])
                fd = (grad_h(m, w + dw).wstar - grad_h(m, w - dw).wstar) / (2 * dw[:, k, None])
                worst_h = max(worst_h, float((np.abs(fd - H[:, :, k]).max(-1) / np.abs(H).max((1, 2))).max()))
                d = np.zeros_like(ws)
                d[:, k] = 1e-6 * np.maximum(np.abs(ws[:, k]), 1.0 if k < m.N else 0.0)
                fd = (grad_hstar(m, ws + d).as_vector() - grad_hstar(m, ws - d).as_vector()) / (2 * d[:, k, None])
                worst_hs = max(worst_hs, float((np.abs(fd - Hs[:, :, k]).max(-1) / np.abs(Hs).max((1, 2))).max()))
        detail.append(f"|hess_hstar hess_h - I| {worst_id:.2e}, FD {worst_h:.2e} / {worst_hs:.2e}")
        assert worst_id <= 1e-8
        assert worst_h <= 1e-5 and worst_hs <= 1e-5


def test_criterion_3_gibbs_duhem():
    detail = ["Gibbs-Duhem"]
    with criterion(3, detail):
        worst = 0.0
        for make in MODELS.values():
            m = make()
            T, rho = random_primal(m)
            p = pressure(m, T, rho)
            gd = -free_energy(m, T, rho) + (rho * chemical_potentials(m, T, rho)).sum(-1)
            ws = grad_h(m, conserved_from_primal(m, T, rho).as_vector()).wstar
            dual = T * hstar_value(m, ws)
            worst = max(worst, float(np.max(np.abs(gd - p) / p)), float(np.max(np.abs(dual - p) / p)))
        detail.append(f"max rel. deviation from the pressure root {worst:.2e}")
        assert worst <= 1e-10


def _user_M(T, rho):
    rho = np.asarray(rho, dtype=float)
    N = rho.shape[-1]
    M = np.zeros(rho.shape + (N,))
    for i in range(N):
        for j in range(i + 1, N):
            e = np.zeros(N)
            e[i], e[j] = 1.0, -1.0
            M += (rho[..., i] * rho[..., j])[..., None, None] * np.outer(e, e)
    return M


def test_criterion_4_structural_positivity():
    detail = ["structural positivity"]
    onsager = [OnsagerInputs(PowerLaw(0.7, 0.5), PowerLaw(0.5, 1.0),
                             ltilde=lambda T, r: np.broadcast_to(np.linspace(1.0, -0.5, r.shape[-1]), r.shape)),
               OnsagerInputs(kappatilde=PowerLaw(2.0), M_builder=_user_M)]
    with criterion(4, detail):
        violations = 0
        models = {"two ideal gases": two_ideal(), "Tait + ideal gas": tait_ideal(),
                  "three species": make_model([S.tait(0.3, 0.4, 0.5, 1.5, rhoR=2.0), S.ideal_gas(2.5, molar_mass=2.0),
                                               S.ideal_gas(3.5, rhoR=0.5, molar_mass=0.7)])}
        for m in models.values():
            b = build_basis(m.N)
            w = random_conserved(m)
            st = to_entropic(m, b, w)
            ev = evaluate(m, b, st.varrho, st.q)
            Rq = R_jacobian(m, b, ev)
            violations += int(np.sum(np.linalg.eigvalsh(0.5 * (Rq + np.swapaxes(Rq, 1, 2)))[:, 0] <= 0))
            cv = heat_capacity(m, ev.T, ev.rho)
            cv_i = np.stack([cv_species(sp, m.ref, ev.T, ev.p) for sp in m.species], -1)
            violations += int(np.sum(cv < cv_i.min(-1) * (1 - 1e-12)))
            for inp in onsager:
                mats = build_onsager(inp, ev.T, ev.rho)
                Mt = Mtilde(b, mats)
                violations += int(np.sum(np.linalg.eigvalsh(0.5 * (Mt + np.swapaxes(Mt, 1, 2)))[:, 0] <= 0))
                ext = np.linalg.eigvalsh(mats.Mext)
                scale = np.abs(mats.Mext).max((1, 2))
                violations += int(np.sum(ext[:, 0] < -1e-12 * scale))
                violations += int(np.sum(ext[:, 1] <= 1e-12 * scale))
                kernel = np.r_[np.ones(m.N), 0.0]
                violations += int(np.sum(np.abs(mats.Mext @ kernel).max(-1) > 1e-12 * scale))
                c = energy_coeffs(m, b, ev.wstar, mats)
                violations += int(np.sum(c.d0 < c.T2_rho_cv * (1 - 1e-12)))
        detail.append(f"{violations} violations over 3 models x 100 states x 2 transport sets")
        assert violations == 0


def _field(x):
    varrho = 1.0 + 0.3 * np.sin(x)
    q = np.stack([0.2 * np.cos(2 * x), -1.0 / (1.5 + 0.4 * np.sin(3 * x))], -1)
    return varrho, q


def test_criterion_5_heat_flux_forms():
    detail = ["heat-flux forms"]
    with criterion(5, detail):
        m, b = tait_ideal(), build_basis(2)
        x = np.linspace(0.0, 2.0, 41)
        ev = evaluate(m, b, *_field(x))
        inp = OnsagerInputs(PowerLaw(0.7, 0.5), PowerLaw(0.5, 1.0), ltilde=lambda T, r: np.broadcast_to([1.0, -0.5],
                                                                                                      r.shape))
        mats = build_onsager(inp, ev.T, ev.rho)
        c = energy_coeffs(m, b, ev.wstar, mats)
        dvr = 0.3 * np.cos(x)
        dq = np.stack([-0.4 * np.sin(2 * x), 1.2 * np.cos(3 * x) / (1.5 + 0.4 * np.sin(3 * x)) ** 2], -1)
        # eighth-order central difference of the internal energy along the field
        wts = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
        h = 1e-3
        deps = sum(wt * evaluate(m, b, *_field(x + (i - 4) * h), hessian=False).rhou
                   for i, wt in enumerate(wts) if wt) / h
        jt = heat_flux_temperature_form(mats, c, (-dq[:, 1])[:, None], dq[:, :1, None])
        je = heat_flux_energy_form(mats, c, deps[:, None], dvr[:, None], dq[:, :1, None])
        dev = float(np.abs(jt - je).max() / np.abs(jt).max())
        detail.append(f"sup rel. deviation {dev:.2e}")
        assert dev <= 1e-8


def test_criterion_6_solver_conservation():
    detail = ["solver conservation"]
    with criterion(6, detail):
        t0 = time.perf_counter()
        m, b = two_ideal(), build_basis(2)
        inputs = SolverInputs(OnsagerInputs(0.1, PowerLaw(0.1)), eta=PowerLaw(0.05))
        g = Grid1D(1.0, 200)
        sv = Solver(m, b, inputs, BoundarySpec(), g, StepConfig(dt=0.2 / g.J))
        pert = 0.1 * np.cos(2 * np.pi * g.x)
        s0 = init_from_primal(m, b, g, 1.0 + 0.05 * np.cos(2 * np.pi * g.x), np.stack([1 + pert, 1 - pert], -1))
        D = sv.run(s0, 1000 * sv.cfg.dt).diagnostics
        mass = np.array([d.mass for d in D])
        energy = np.array([d.energy for d in D])
        entropy = np.array([d.entropy for d in D])
        dm = float(np.abs(mass / mass[0] - 1).max())
        de = float(np.abs(energy / energy[0] - 1).max())
        ds = float((np.diff(entropy) / np.abs(entropy).max()).min())
        eq = init_from_primal(m, b, g, 1.3, [0.7, 1.1])
        e1, _ = sv.step(eq)
        dq = float(np.abs(e1.q - eq.q).max() / np.abs(eq.q).max())
        secs = time.perf_counter() - t0
        detail.append(f"{len(D) - 1} steps, mass {dm:.1e}, energy {de:.1e}, min entropy step {ds:.1e}, "
                      f"fixed point {dq:.1e}")
        assert len(D) == 1001
        assert dm <= 1e-9 and de <= 1e-8 and ds >= -1e-8
        assert dq <= 1e-12 and np.abs(e1.varrho - eq.varrho).max() <= 1e-12 and np.abs(e1.v).max() <= 1e-12
        assert secs < 60.0


def test_criterion_7_growth_application():
    detail = ["growth checker"]
    with criterion(7, detail):
        t0 = time.perf_counter()
        m = make_model([S.ideal_gas(c0=1.5), S.ideal_gas(c0=2.5, molar_mass=2.0)])
        six5 = F(6, 5)
        rep = check_growth(m, 6, CoeffGrowthSpec(2, 2, six5, six5, six5, six5))
        w = growth_window(m, 6)
        beta, s0, _ = rep.witness
        bounds = (w.l_exponent_bound(beta, s0), w.M_exponent_bound(beta), w.visc_exponent_bound(beta))
        bad = check_growth(m, 6, CoeffGrowthSpec(2, 2, six5, six5, F(3, 2), six5))
        secs = time.perf_counter() - t0
        detail.append(f"{rep.summary()}; eta 3/2 -> {bad.summary()}")
        assert rep.passed and rep.witness == (1, 2, 2)
        assert all(isinstance(x, F) for x in rep.witness)
        assert all(bd >= six5 for bd in bounds)
        assert not bad.passed and bad.violated.name == "viscosity_growth"
        assert secs < 1.0


def test_criterion_8_asymptotic_exponents():
    detail = ["asymptotic exponents"]
    with criterion(8, detail):
        t0 = time.perf_counter()
        b = build_basis(2)
        models = {"ideal": make_model([S.ideal_gas(c0=1.5), S.ideal_gas(c0=2.5, molar_mass=2.0)]),
                  "Tait": make_model([S.tait(alpha=0.5, beta=0.3, gamma=1.0, c0=2.0), S.ideal_gas(c0=1.5)])}
        worst, resid = 0.0, 0.0
        for m in models.values():
            for qn in ("rhou", "cv", "pressure", "d0"):
                f = fit_asymptotics(m, b, 1.0, [0.3], (1e2, 1e6), qn)
                worst = max(worst, abs(f.slope - f.predicted))
            f = fit_asymptotics(m, b, 1.0, [0.3], (1e2, 1e6), "rho_minority")
            resid = max(resid, f.residual)
        secs = time.perf_counter() - t0
        detail.append(f"max slope error {worst:.3f}, minority fit residual {resid:.1e}")
        assert worst <= 0.05 and resid <= 1e-2
        assert secs < 10.0


def _grid_argmin(model, ws, lo, hi, spacings=(0.15, 0.025, 0.005, 0.001)):
    """Minimize h(w) - ws.w over nested grids; each level spans +-3 cells of the previous one."""
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    for s in spacings:
        axes = [np.arange(c - hw, c + hw + 0.5 * s, s) for c, hw in zip(center, half)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, center.size)
        pts = pts[np.all(pts > 0, -1)]
        center = pts[np.argmin(entropy_h(model, pts) - pts @ ws)]
        half = np.full(center.size, 3 * s)
    return center


def test_criterion_9_grid_conjugate_oracle():
    detail = ["grid conjugate oracle"]
    with criterion(9, detail):
        m = two_ideal()
        dual_states = [np.array([1.0, 0.5, -1.0]), np.array([0.2, 1.5, -0.5]), np.array([2.0, 1.0, -2.0])]
        worst = 0.0
        for ws in dual_states:
            target = grad_hstar(m, ws).as_vector()
            found = _grid_argmin(m, ws, np.zeros(3), np.full(3, 6.0))
            worst = max(worst, float(np.abs(found - target).max()))
        detail.append(f"max |grid argmin - grad_hstar| {worst:.1e} at spacing 1e-3")
        assert worst <= 1e-3
