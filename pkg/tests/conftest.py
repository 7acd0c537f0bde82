import numpy as np
import pytest

from mixflow.mixture import MixtureModel, conserved_from_primal
from mixflow.species import SpeciesParams as S

SEED = 20240611


def single_ideal():
    return MixtureModel((S.ideal_gas(c0=2.0),))


def two_ideal():
    return MixtureModel((S.ideal_gas(c0=1.5), S.ideal_gas(c0=2.5, molar_mass=2.0, rhoR=0.8, g1=0.3, g0=-0.2)))


def tait_ideal():
    return MixtureModel((S.tait(alpha=0.5, beta=0.5, gamma=1.0, c0=1.0), S.ideal_gas(c0=2.5, molar_mass=2.0)))


def three_species():
    return MixtureModel((S.tait(alpha=0.3, beta=0.4, gamma=0.5, c0=1.5, rhoR=2.0),
                         S.ideal_gas(c0=2.5, molar_mass=2.0),
                         S.ideal_gas(c0=3.5, rhoR=0.5, molar_mass=0.7, g1=0.3, g0=0.2)))


MODELS = {
    "single_ideal": single_ideal,
    "two_ideal": two_ideal,
    "tait_ideal": tait_ideal,
    "three_species": three_species,
}
MULTI = ("two_ideal", "tait_ideal", "three_species")


def random_primal(model, n=100, seed=SEED):
    """T in logU[0.1, 100], rho_i in logU[0.1, 10]."""
    rng = np.random.default_rng(seed)
    T = np.exp(rng.uniform(np.log(0.1), np.log(100.0), n))
    rho = np.exp(rng.uniform(np.log(0.1), np.log(10.0), (n, model.N)))
    return T, rho


def random_conserved(model, n=100, seed=SEED):
    T, rho = random_primal(model, n, seed)
    return conserved_from_primal(model, T, rho).as_vector()


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


@pytest.fixture(params=list(MODELS))
def model(request):
    return MODELS[request.param]()


@pytest.fixture(params=list(MULTI))
def multi_model(request):
    return MODELS[request.param]()


# acceptance report: (criterion, passed, detail, seconds), printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail, secs in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} ({secs:.2f}s)")
