import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_conserved, rel_err, tait_ideal
from mixflow.entropic import build_basis, evaluate, to_entropic
from mixflow.errors import ValidationError
from mixflow.mixture import grad_h, heat_capacity, make_model
from mixflow.species import SpeciesParams as S
from mixflow.transport import (Mtilde, OnsagerInputs, PowerLaw, build_onsager, default_M, energy_coeffs,
                               fluxes_entropic, fluxes_primal, force_projection, heat_flux_energy_form,
                               heat_flux_temperature_form)

FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _d8(f, x, h=1e-3):
    """Eighth-order central difference."""
    return sum(w * f(x + (i - 4) * h) for i, w in enumerate(FD8) if w) / h


def _ltilde(coef):
    coef = np.asarray(coef, dtype=float)
    return lambda T, rho: np.broadcast_to(coef, np.shape(rho))


def _user_M(T, rho):
    # a second PSD mobility with kernel 1: sum of rank-one pair terms
    rho = np.asarray(rho, dtype=float)
    N = rho.shape[-1]
    M = np.zeros(rho.shape + (N,))
    for i in range(N):
        for j in range(i + 1, N):
            e = np.zeros(N)
            e[i], e[j] = 1.0, -1.0
            M += (rho[..., i] * rho[..., j])[..., None, None] * np.outer(e, e)
    return M


INPUTS = {
    "default": OnsagerInputs(1.0, PowerLaw(1.0)),
    "thermodiffusion": OnsagerInputs(PowerLaw(0.7, 0.5), PowerLaw(0.5, 1.0), ltilde=_ltilde([1.0, -0.5])),
    "user_M": OnsagerInputs(kappatilde=PowerLaw(2.0), ltilde=_ltilde([0.3, 0.0]), M_builder=_user_M),
}


def _inputs_for(name, N):
    inp = INPUTS[name]
    if inp.ltilde is None:
        return inp
    lt = np.linspace(1.0, -0.5, N)
    return OnsagerInputs(inp.mobility, inp.kappatilde, _ltilde(lt), inp.M_builder)


def test_default_M_example():
    M = default_M(1.0, [1.0, 1.0], 1.0)
    assert np.allclose(M, [[0.5, -0.5], [-0.5, 0.5]], rtol=0, atol=1e-16)


@settings(max_examples=50, deadline=None)
@given(rho=arrays(float, 4, elements=st.floats(1e-2, 1e2)), z=arrays(float, 4, elements=st.floats(-10, 10)),
       d=st.floats(1e-3, 1e3))
def test_default_M_kernel_and_psd(rho, z, d):
    M = default_M(1.0, rho, d)
    scale = np.abs(M).max()
    assert np.abs(M.sum(-1)).max() <= 1e-12 * scale * 4
    assert z @ M @ z >= -1e-12 * scale * (z @ z)
    assert np.array_equal(M, M.T)


def test_default_M_rank():
    ev = np.linalg.eigvalsh(default_M(1.0, [0.3, 2.0, 5.0], 1.0))
    assert abs(ev[0]) <= 1e-14 and ev[1] > 1e-3


def test_build_onsager_example():
    inp = OnsagerInputs(1.0, PowerLaw(1.0), ltilde=_ltilde([1.0, 0.0]))
    mats = build_onsager(inp, 1.0, np.array([1.0, 1.0]))
    assert np.allclose(mats.l, [-0.5, 0.5], rtol=0, atol=1e-16)
    assert mats.kappa == pytest.approx(1.5, rel=1e-15)
    assert np.allclose(mats.Mext @ [1.0, 1.0, 0.0], 0.0, atol=1e-15)


def test_zero_ltilde_block_diagonal():
    mats = build_onsager(OnsagerInputs(2.0, PowerLaw(3.0, 1.0)), 2.0, np.array([1.0, 4.0, 0.5]))
    assert np.all(mats.l == 0) and mats.kappa == pytest.approx(6.0)
    assert np.all(mats.Mext[:3, 3] == 0)


@pytest.mark.parametrize("bad", [
    lambda T, r: np.eye(2),                                   # kernel is not 1
    lambda T, r: -default_M(T, r, 1.0),                       # negative definite
    lambda T, r: np.array([[1.0, -1.0], [-0.5, 0.5]]),        # not symmetric
    lambda T, r: np.zeros((2, 2)),                            # rank deficient
])
def test_user_M_validation(bad):
    with pytest.raises(ValidationError):
        build_onsager(OnsagerInputs(M_builder=bad), 1.0, np.array([1.0, 2.0]))


@pytest.mark.parametrize("inputs", list(INPUTS))
def test_onsager_structure(multi_model, inputs):
    w = random_conserved(multi_model)
    b = build_basis(multi_model.N)
    ev = evaluate(multi_model, b, *_split(to_entropic(multi_model, b, w)))
    mats = build_onsager(_inputs_for(inputs, multi_model.N), ev.T, ev.rho)
    N = multi_model.N
    Mext = mats.Mext
    norm = np.abs(Mext).max(axis=(1, 2))
    eig = np.linalg.eigvalsh(Mext)
    assert np.all(eig[:, 0] >= -1e-10 * norm)
    assert np.all(eig[:, 1] > 1e-10 * norm)
    assert np.all(np.abs(Mext @ np.r_[np.ones(N), 0.0]).max(-1) <= 1e-12 * norm)
    assert np.abs(mats.l.sum(-1)).max() <= 1e-12 * np.abs(mats.l).max(initial=1.0)
    Mt = Mtilde(b, mats)
    np.linalg.cholesky(0.5 * (Mt + np.swapaxes(Mt, 1, 2)))


def _split(s):
    return s.varrho, s.q


@settings(max_examples=50, deadline=None)
@given(G=arrays(float, (3, 2), elements=st.floats(-5, 5)), i=st.integers(0, 99))
def test_entropy_production_nonnegative(G, i):
    model = tait_ideal()
    b = build_basis(2)
    ev = evaluate(model, b, *_split(to_entropic(model, b, random_conserved(model)[i])))
    mats = build_onsager(_inputs_for("thermodiffusion", 2), ev.T, ev.rho)
    assert np.sum(G * (mats.Mext @ G)) >= -1e-10 * np.abs(mats.Mext).max() * np.sum(G * G)


def test_primal_fluxes_zero_and_pure_heat():
    mats = build_onsager(_inputs_for("thermodiffusion", 2), 1.3, np.array([0.4, 1.1]))
    model = tait_ideal()
    J, Jh = fluxes_primal(model, mats, np.zeros((3, 1)), None, 1.3)
    assert np.all(J == 0) and np.all(Jh == 0)
    # only grad(1/T) nonzero: the last dual component is -1/T
    g = np.array([[0.0, 0.0], [0.0, 0.0], [-0.7, 0.2]])
    J, Jh = fluxes_primal(model, mats, g, None, 1.3)
    assert np.allclose(J, np.outer(mats.l, [0.7, -0.2]), rtol=1e-14)
    assert np.allclose(Jh, mats.kappa * np.array([0.7, -0.2]), rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(G=arrays(float, (3, 2), elements=st.floats(-5, 5)), B=arrays(float, (2, 2), elements=st.floats(-5, 5)))
def test_primal_mass_fluxes_sum_to_zero(G, B):
    mats = build_onsager(_inputs_for("thermodiffusion", 2), 2.0, np.array([0.4, 1.1]))
    J, _ = fluxes_primal(tait_ideal(), mats, G, B, 2.0)
    assert np.abs(J.sum(0)).max() <= 1e-12 * max(1.0, np.abs(J).max())


def _manufactured(x):
    varrho = 1.0 + 0.3 * np.sin(x)
    q = np.stack([0.2 * np.cos(2 * x), -1.0 / (1.5 + 0.4 * np.sin(3 * x))], -1)
    return varrho, q


def _manufactured_grad(x):
    dq = np.stack([-0.4 * np.sin(2 * x), 1.2 * np.cos(3 * x) / (1.5 + 0.4 * np.sin(3 * x)) ** 2], -1)
    return 0.3 * np.cos(x), dq


@pytest.mark.parametrize("inputs", ["default", "thermodiffusion"])
def test_entropic_fluxes_match_primal(inputs):
    model, b = tait_ideal(), build_basis(2)
    x = np.linspace(0.0, 2.0, 11)
    ev = evaluate(model, b, *_manufactured(x))
    mats = build_onsager(_inputs_for(inputs, 2), ev.T, ev.rho)
    dws = _d8(lambda y: evaluate(model, b, *_manufactured(y), hessian=False).wstar, x)
    _, dq = _manufactured_grad(x)
    for j in range(x.size):
        mj = type(mats)(mats.M[j], mats.l[j], mats.kappa[j], mats.Mext[j])
        J, Jh = fluxes_primal(model, mj, dws[j][:, None], None, ev.T[j])
        F = fluxes_entropic(b, mj, dq[j][:, None], ev.q[j, -1])
        ref = np.r_[J[:, 0], Jh]
        assert np.abs(F[:, 0] - ref).max() <= 1e-9 * np.abs(ref).max()
        assert abs(F[:2, 0].sum()) <= 1e-12 * np.abs(F).max()


def test_entropic_fluxes_with_forces():
    model, b = tait_ideal(), build_basis(2)
    ev = evaluate(model, b, *_manufactured(np.array([0.7])))
    mats = build_onsager(_inputs_for("thermodiffusion", 2), ev.T, ev.rho)
    mj = type(mats)(mats.M[0], mats.l[0], mats.kappa[0], mats.Mext[0])
    bforce = np.array([[0.3], [-1.2]])
    G = np.zeros((3, 1))
    J, Jh = fluxes_primal(model, mj, G, bforce, ev.T[0])
    F = fluxes_entropic(b, mj, np.zeros((2, 1)), ev.q[0, -1], force_projection(b, bforce))
    assert np.allclose(F[:, 0], np.r_[J[:, 0], Jh], rtol=1e-12, atol=1e-14)


def test_zero_gradients_zero_entropic_flux():
    mats = build_onsager(_inputs_for("thermodiffusion", 2), 1.0, np.array([1.0, 1.0]))
    assert np.all(fluxes_entropic(build_basis(2), mats, np.zeros((2, 1)), -1.0) == 0)


@pytest.mark.parametrize("inputs", list(INPUTS))
def test_energy_coefficients(multi_model, inputs):
    w = random_conserved(multi_model)
    b = build_basis(multi_model.N)
    ws = grad_h(multi_model, w).wstar
    ev = evaluate(multi_model, b, *_split(to_entropic(multi_model, b, w)))
    mats = build_onsager(_inputs_for(inputs, multi_model.N), ev.T, ev.rho)
    c = energy_coeffs(multi_model, b, ws, mats)
    assert rel_err(c.d0, c.d0_equiv) <= 1e-8
    cv = heat_capacity(multi_model, ev.T, ev.rho)
    assert rel_err(c.T2_rho_cv, ev.T**2 * ev.rho.sum(-1) * cv) <= 1e-12
    assert np.all(c.d0 > 0)
    assert np.all(c.d0 >= c.T2_rho_cv * (1 - 1e-10))
    assert np.allclose(c.L, mats.l @ b.xi[: b.N - 1, : b.N].T, rtol=1e-14, atol=0)


def test_energy_coefficients_symmetric_two_gas():
    model = make_model([S.ideal_gas(c0=2.0), S.ideal_gas(c0=2.0)])
    b = build_basis(2)
    ev = evaluate(model, b, np.array([2.0]), np.array([[0.0, -0.5]]))
    mats = build_onsager(OnsagerInputs(), ev.T, ev.rho)
    c = energy_coeffs(model, b, ev.wstar, mats)
    # identical constituents: the cross term vanishes
    assert c.d0[0] == pytest.approx(c.T2_rho_cv[0], rel=1e-12)
    assert c.d0_equiv[0] == pytest.approx(c.T2_rho_cv[0], rel=1e-12)


@pytest.mark.parametrize("inputs", ["default", "thermodiffusion", "user_M"])
def test_heat_flux_two_forms(inputs):
    model, b = tait_ideal(), build_basis(2)
    x = np.linspace(0.0, 2.0, 21)
    ev = evaluate(model, b, *_manufactured(x))
    mats = build_onsager(_inputs_for(inputs, 2), ev.T, ev.rho)
    c = energy_coeffs(model, b, ev.wstar, mats)
    dvr, dq = _manufactured_grad(x)
    deps = _d8(lambda y: evaluate(model, b, *_manufactured(y), hessian=False).rhou, x)
    jt = heat_flux_temperature_form(mats, c, (-dq[:, 1])[:, None], dq[:, :1, None])
    je = heat_flux_energy_form(mats, c, deps[:, None], dvr[:, None], dq[:, :1, None])
    assert np.abs(jt - je).max() <= 1e-8 * np.abs(jt).max()
