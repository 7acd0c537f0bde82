"""Growth-condition checker and large-temperature asymptotics.

The checker works in exact rational arithmetic: every exponent is turned
into a :class:`fractions.Fraction` and all interval ends are computed
exactly, so strict inequalities are decided without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .entropic import Basis, evaluate
from .errors import MixflowError
from .mixture import MixtureModel, _heat_capacity
from .transport import OnsagerInputs, build_onsager, energy_coeffs

Number = Union[int, float, str, Fraction]

FIT_RESIDUAL_MAX = 1e-2
# largest b T^gamma kept in exponential-decay sweeps
EXP_DECAY_CAP = 600.0


class NoDominantSpecies(MixflowError):
    pass


class InfeasibleWindow(MixflowError):
    pass


class FitUnreliable(MixflowError):
    pass


def as_fraction(x: Number) -> Fraction:
    """Exact rational for ints, strings like ``"6/5"`` and the shortest repr of floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("exponents must be finite")
        return Fraction(repr(x))
    return Fraction(x)


# -- dominance -----------------------------------------------------------------

@dataclass(frozen=True)
class DominanceReport:
    gamma_max: Fraction
    dominant_index: int  # zero-based
    strict_ordering_ok: bool
    keys: Tuple[float, ...]


def _tie_key(model: MixtureModel, k: int, gamma_max: Fraction) -> float:
    sp, ref = model.species[k], model.ref
    if gamma_max > 0:
        return sp.c0
    return sp.c0 - ref.p0 / (sp.rhoR * ref.T0)


def dominant_species(model: MixtureModel) -> DominanceReport:
    """Species with the fastest-growing heat capacity (ties broken by the constant)."""
    gammas = [as_fraction(0 if sp.is_ideal else sp.gamma) for sp in model.species]
    gmax = max(gammas)
    cand = [k for k, g in enumerate(gammas) if g == gmax]
    keys = [_tie_key(model, k, gmax) for k in cand]
    order = np.argsort(keys, kind="stable")
    sorted_keys = [keys[i] for i in order]
    strict = all(a < b for a, b in zip(sorted_keys, sorted_keys[1:]))
    if not strict:
        raise NoDominantSpecies("species with maximal heat-capacity exponent are not strictly ordered")
    return DominanceReport(gmax, cand[int(order[-1])], True, tuple(keys))


# -- growth window ---------------------------------------------------------------

def _inv(p) -> Fraction:
    return Fraction(0) if p == math.inf else 1 / as_fraction(p)


@dataclass(frozen=True)
class GrowthWindow:
    """Admissible exponent ranges; intervals are half-open ``[lo, hi)``."""

    p: Union[Fraction, float]
    gamma: Fraction
    delta: Fraction

    @property
    def beta_interval(self) -> Tuple[Fraction, Fraction]:
        g, d = self.gamma, self.delta
        lo = max(Fraction(1), (5 * d - 1) / 6)
        hi = min(3 + 5 * g / (2 * (1 + g)), 3 - 5 * _inv(self.p) + 5 * (1 - d) / (g + 1))
        return lo, hi

    def s_interval(self, beta: Number) -> Tuple[Fraction, Fraction]:
        b, g, d = as_fraction(beta), self.gamma, self.delta
        lo = 2 * b * (1 + g) - g
        hi = min(Fraction(6, 5) * (1 + b) * (1 + g),
                 Fraction(6, 5) * (1 + g) * (1 + b - Fraction(5, 3) * _inv(self.p)) + 2 * (1 - d) - g)
        return lo, hi

    def l_exponent_bound(self, beta: Number, s0: Number) -> Fraction:
        """Largest admissible growth exponent of ``|l|`` (attained values allowed)."""
        b, g = as_fraction(beta), self.gamma
        return as_fraction(s0) / 2 + Fraction(3, 5) * (1 + b) * (1 + g) - 1 - g / 2

    def visc_exponent_bound(self, beta: Number) -> Fraction:
        """Exponents of ``eta + |lambda|`` must stay strictly below this."""
        b, g = as_fraction(beta), self.gamma
        return (Fraction(6, 5) * (1 + b) - 1) * (1 + g)

    def M_exponent_bound(self, beta: Number) -> Fraction:
        """Exponents of ``|M|`` must stay strictly below this.

        The mobility enters through ``J : b``; shifting its exponent by one
        power of the energy and imposing the thermo-diffusion restriction
        gives the same bound as the viscosity restriction.
        """
        return self.visc_exponent_bound(beta)

    def delta_ok(self) -> bool:
        return self.delta < 1 + (Fraction(2, 5) - _inv(self.p)) * (1 + self.gamma)


def _dominant_exponents(model: MixtureModel):
    rep = dominant_species(model)
    sp = model.species[rep.dominant_index]
    if sp.is_ideal:
        alpha, beta = Fraction(1), Fraction(0)
    else:
        alpha, beta = as_fraction(sp.alpha), as_fraction(sp.beta)
    return rep, alpha / (1 - beta)


def growth_window(model: MixtureModel, p: Number) -> GrowthWindow:
    if p != math.inf:
        p = as_fraction(p)
    if not p > 5:
        raise InfeasibleWindow("integrability exponent p must exceed 5")
    rep, delta = _dominant_exponents(model)
    w = GrowthWindow(p, rep.gamma_max, delta)
    if not w.delta_ok():
        raise InfeasibleWindow(f"delta = {delta} violates delta < 1 + (2/5 - 1/p)(1 + gamma)")
    lo, hi = w.beta_interval
    if not lo < hi:
        raise InfeasibleWindow(f"beta interval [{lo}, {hi}) is empty")
    return w


@dataclass(frozen=True)
class CoeffGrowthSpec:
    """Growth exponents in ``T``: ``T^kappa_lower <~ kappa <~ T^kappa_upper`` and upper bounds for the rest.

    ``None`` marks a coefficient that vanishes identically.
    """

    kappa_lower: Number
    kappa_upper: Number
    l: Optional[Number] = None
    M: Optional[Number] = None
    eta: Optional[Number] = None
    lam: Optional[Number] = None

    def fractions(self):
        out = {k: as_fraction(getattr(self, k)) for k in ("kappa_lower", "kappa_upper")}
        for k in ("l", "M", "eta", "lam"):
            v = getattr(self, k)
            out[k] = None if v is None else as_fraction(v)
        return out


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    witness: Optional[Tuple[Fraction, Fraction, Fraction]]
    checks: Tuple[Check, ...]
    window: Optional[GrowthWindow] = None

    @property
    def violated(self) -> Optional[Check]:
        return next((c for c in self.checks if not c.ok), None)

    def summary(self) -> str:
        if self.passed:
            b, s0, s1 = self.witness
            return f"PASS (beta={b}, s0={s0}, s1={s1})"
        v = self.violated
        return f"FAIL ({v.name}: {v.detail})"


def _conditions(w: GrowthWindow, e, beta: Fraction, s0: Fraction, s1: Fraction) -> List[Check]:
    lo, hi = w.beta_interval
    slo, shi = w.s_interval(beta)
    g, d = w.gamma, w.delta
    lb = w.l_exponent_bound(beta, s0)
    vb = w.visc_exponent_bound(beta)
    mb = w.M_exponent_bound(beta)
    visc_exps = [x for x in (e["eta"], e["lam"]) if x is not None]
    visc = max(visc_exps) if visc_exps else None
    return [
        Check("delta_window", w.delta_ok(), f"delta={d}"),
        Check("beta_range", lo <= beta < hi, f"beta={beta}, need [{lo}, {hi})"),
        Check("delta_vs_beta", d <= (6 * beta + 1) * (1 + g) / 5, f"delta={d}, need <= {(6 * beta + 1) * (1 + g) / 5}"),
        Check("kappa_lower", s0 >= slo, f"s0={s0}, need >= {slo}"),
        Check("kappa_order", s0 <= s1, f"s0={s0}, need <= s1={s1}"),
        Check("kappa_upper", s1 < shi, f"s1={s1}, need < {shi}"),
        _bound("l_growth", e["l"], lb, strict=False),
        _bound("viscosity_growth", visc, vb, strict=True),
        _bound("M_growth", e["M"], mb, strict=True),
    ]


def _bound(name: str, exponent: Optional[Fraction], bound: Fraction, strict: bool) -> Check:
    if exponent is None:
        return Check(name, True, f"coefficient vanishes (bound {bound})")
    ok = exponent < bound if strict else exponent <= bound
    return Check(name, ok, f"exponent {exponent}, need {'<' if strict else '<='} {bound}")


def _beta_candidates(w: GrowthWindow, s0: Fraction) -> List[Fraction]:
    lo, hi = w.beta_interval
    cap = (s0 + w.gamma) / (2 * (1 + w.gamma))
    if cap < hi:
        # every condition other than kappa_lower prefers larger beta
        return [max(cap, lo)] if cap >= lo else [lo]
    return [hi - Fraction(1, 10**k) for k in range(2, 10)]


def check_growth(model: MixtureModel, p: Number, spec: CoeffGrowthSpec,
                 beta: Optional[Number] = None) -> GrowthReport:
    """Search for ``(beta, s0, s1)`` making every growth condition hold.

    With ``kappa`` bounded between ``T^kappa_lower`` and ``T^kappa_upper``
    the best choice is ``s0 = kappa_lower`` and ``s1 = kappa_upper``.  The
    remaining freedom is ``beta``; pass it to pin a particular value.
    """
    e = spec.fractions()
    try:
        w = growth_window(model, p)
    except InfeasibleWindow as exc:
        return GrowthReport(False, None, (Check("delta_window", False, str(exc)),))
    s0, s1 = e["kappa_lower"], e["kappa_upper"]
    cands = [as_fraction(beta)] if beta is not None else _beta_candidates(w, s0)
    first = None
    for b in cands:
        checks = _conditions(w, e, b, s0, s1)
        if all(c.ok for c in checks):
            return GrowthReport(True, (b, s0, s1), tuple(checks), w)
        first = first or checks
    return GrowthReport(False, None, tuple(first), w)


# -- asymptotics -----------------------------------------------------------------

QUANTITIES = ("rhou", "rhoH", "cv", "pressure", "d0", "a0", "a_k", "rho_minority")

# values below this multiple of eps times their own cancellation scale are noise
_RESOLUTION = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class AsymptoticFit:
    quantity: str
    slope: float
    predicted: Optional[float]
    T_range: Tuple[float, float]
    residual: float
    form: str  # "power": log y vs log T, "exp": log y vs T^gamma, "unresolved": below round-off
    one_sided: bool = False
    samples: int = 0

    def within(self, tol: float = 0.05) -> bool:
        if self.predicted is None:
            return True
        if self.one_sided:
            return self.slope <= self.predicted + tol
        return abs(self.slope - self.predicted) <= tol


def _sweep(model, basis, varrho, qbar, Ts):
    Ts = np.asarray(Ts, dtype=float)
    q = np.empty((Ts.size, basis.N))
    q[:, :-1] = qbar
    q[:, -1] = -1.0 / Ts
    return evaluate(model, basis, np.full(Ts.size, float(varrho)), q)


def _values(model, basis, ev, quantity: str, minority, onsager):
    """Sampled quantity and the magnitude of the terms it was computed from."""
    e = ev.e
    if quantity == "rhou":
        y = ev.rhou
    elif quantity == "rhoH":
        y = (e.rho * e.H).sum(-1)
    elif quantity == "cv":
        y = _heat_capacity(e)
    elif quantity == "pressure":
        y = e.p
    elif quantity == "rho_minority":
        y = e.rho[:, minority]
    else:
        mats = build_onsager(onsager, e.T, e.rho)
        c = energy_coeffs(model, basis, ev.wstar, mats)
        if quantity == "d0":
            y = c.d0
        elif quantity == "a0":
            y = c.a0
        else:
            D, xi, N = ev.D, basis.xi, basis.N
            col, Dx = D[:, :, N], D @ xi[N]
            denom = Dx @ xi[N]
            first = np.abs(col @ xi[: N - 1].T)
            second = np.abs((col @ xi[N])[:, None] * (Dx @ xi[: N - 1].T) / denom[:, None])
            k = np.abs(c.a).argmax(-1)
            rows = np.arange(k.size)
            return np.abs(c.a[rows, k]), first[rows, k] + second[rows, k]
    return np.abs(y), np.abs(y)


def _temperatures(model, basis, varrho, qbar, T_range, n, gmax, minority) -> np.ndarray:
    rng = np.asarray(T_range, dtype=float)
    if rng.size != 2:
        return np.sort(rng)
    T_lo, T_hi = float(rng[0]), float(rng[1])
    if gmax > 0 and minority is not None:
        T_hi = min(T_hi, _exp_cap(model, basis, varrho, qbar, T_lo, gmax, minority))
    return geometric_range(T_lo, T_hi, n)


def geometric_range(T_lo: float, T_hi: float, n: int = 12) -> np.ndarray:
    return np.geomspace(T_lo, T_hi, n)


def fit_asymptotics(model: MixtureModel, basis: Basis, varrho: float, qbar: Sequence[float],
                    T_range=(1e2, 1e6), quantity: str = "rhou", *, n: int = 12,
                    minority: Optional[int] = None, onsager: OnsagerInputs = OnsagerInputs(),
                    threshold: float = FIT_RESIDUAL_MAX) -> AsymptoticFit:
    """Fit the large-temperature growth of ``quantity`` at fixed ``(varrho, qbar)``.

    ``T_range`` is either ``(T_lo, T_hi)`` (``n`` geometric samples) or an
    explicit array of at least 8 temperatures.  When the dominant
    exponent ``gamma_max`` is positive, minority densities decay like
    ``exp(-b T^gamma)``; the upper end is then lowered so that the
    exponent stays above ``-EXP_DECAY_CAP`` and the decay fits as
    ``log rho_j`` against ``T^gamma``.  The residual is the largest
    deviation from the fitted line relative to ``max(1, spread of log y)``.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {', '.join(QUANTITIES)}")
    qbar = np.atleast_1d(np.asarray(qbar, dtype=float))
    if qbar.shape != (basis.N - 1,):
        raise ValueError(f"qbar must have length {basis.N - 1}")
    rep, delta = _dominant_exponents(model)
    I = rep.dominant_index
    gmax = float(rep.gamma_max)
    if minority is None:
        minority = next((j for j in range(model.N) if j != I), None)
    if quantity == "rho_minority" and (minority is None or minority == I):
        raise ValueError("rho_minority needs a species other than the dominant one")

    Ts = _temperatures(model, basis, varrho, qbar, T_range, n, gmax, minority)
    if Ts.size < 8:
        raise ValueError("asymptotic fits need at least 8 temperatures")
    if not Ts[0] < Ts[-1]:
        raise ValueError("temperature range is empty")

    predicted, one_sided = {
        "rhou": (1 + gmax, False),
        "rhoH": (1 + gmax, False),
        "cv": (gmax, False),
        "pressure": (float(delta), False),
        "d0": (2 + gmax, False),
        "a0": (gmax + float(delta), True),
        "a_k": (1 + gmax, True),
        # minority densities decay: only the sign of the slope is predicted
        "rho_minority": (0.0, True),
    }[quantity]
    form = "exp" if quantity == "rho_minority" and gmax > 0 else "power"

    ev = _sweep(model, basis, varrho, qbar, Ts)
    y, scale = _values(model, basis, ev, quantity, minority, onsager)
    resolved = y > _RESOLUTION * scale
    T_span = (float(Ts[0]), float(Ts[-1]))
    if resolved.sum() < 8:
        if not one_sided:
            raise FitUnreliable(f"{quantity}: values are at round-off level")
        # a one-sided bound holds trivially for values lost in round-off
        return AsymptoticFit(quantity, -math.inf, predicted, T_span, 0.0, "unresolved", one_sided, int(Ts.size))

    X = Ts**gmax if form == "exp" else np.log(Ts)
    X, logy = X[resolved], np.log(y[resolved])
    slope, intercept = np.polyfit(X, logy, 1)
    resid = logy - (slope * X + intercept)
    residual = float(np.abs(resid).max() / max(np.ptp(logy), 1.0))
    fit = AsymptoticFit(quantity, float(slope), predicted, T_span, residual, form, one_sided, int(resolved.sum()))
    if residual > threshold:
        raise FitUnreliable(f"{quantity}: relative fit residual {residual:.3g} exceeds {threshold:g}")
    return fit


def _exp_cap(model, basis, varrho, qbar, T_lo, gmax, minority) -> float:
    """Temperature where the minority log-density has dropped by about EXP_DECAY_CAP."""
    T2 = np.array([T_lo, 2.0 * T_lo])
    lr = np.log(_sweep(model, basis, varrho, qbar, T2).rho[:, minority])
    b = -(lr[1] - lr[0]) / (T2[1] ** gmax - T2[0] ** gmax)
    if not b > 0:
        return math.inf
    return float((EXP_DECAY_CAP / b) ** (1.0 / gmax))


def dominant_fraction_bounds(model: MixtureModel, basis: Basis, varrho: float, qbar, T_range=(1e2, 1e6),
                             n: int = 12) -> Tuple[float, float]:
    """Min and max mole fraction of the dominant species over the sweep."""
    rep = dominant_species(model)
    minority = next((j for j in range(model.N) if j != rep.dominant_index), None)
    qbar = np.atleast_1d(np.asarray(qbar, dtype=float))
    Ts = _temperatures(model, basis, varrho, qbar, T_range, n, float(rep.gamma_max), minority)
    e = _sweep(model, basis, varrho, qbar, Ts).e
    x = e.n[:, rep.dominant_index] / e.n.sum(-1)
    return float(x.min()), float(x.max())
