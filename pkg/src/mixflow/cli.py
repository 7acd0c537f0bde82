"""Command-line entry point: ``mixflow {validate,simulate,check-growth,asymptotics,tabulate}``."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import analysis, config
from .dual import grad_hstar
from .entropic import build_basis
from .errors import MixflowError, ValidationError
from .mixture import (MixtureModel, _chemical_potentials, _entropy_neg, _evaluate, _heat_capacity,
                      _internal_energy, conserved_from_primal, grad_h)
from .solver import BoundarySpec, Grid1D, RobinCooling, Solver, SolverError, SolverInputs, StepConfig, \
    init_from_primal, snapshot_table
from .species import parameter_violations, validate_species
from .transport import build_onsager, check_mobility

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

ROUNDTRIP_TOL = 1e-10


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % (float(x) + 0.0)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


class Reporter:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def build_model(cfg) -> MixtureModel:
    return MixtureModel(tuple(config.species_list(cfg)), config.reference(cfg))


# -- validate --------------------------------------------------------------------

def cmd_validate(cfg, out: Reporter) -> int:
    ref = config.reference(cfg)
    failures = 0
    species = config.species_list(cfg)
    for k, sp in enumerate(species, start=1):
        for v in parameter_violations(sp, ref):
            out(f"FAIL species {k} ({sp.name}): parameter condition violated: {v}")
            failures += 1
        if parameter_violations(sp, ref):
            continue
        rep = validate_species(sp, ref)
        for v in rep.violations:
            out(f"FAIL species {k} ({sp.name}): {v}")
        for wmsg in rep.warnings:
            out(f"warning species {k} ({sp.name}): {wmsg}")
        failures += len(rep.violations)
        if rep.ok:
            out(f"ok   species {k} ({sp.name}): sign conditions")
    if not any(sp.is_ideal for sp in species):
        out("warning mixture: no ideal-gas species; the low-pressure limit of the pressure root is unbounded")
    bc = cfg.get("boundary", {"type": "insulated"})
    if bc["type"] == "robin" and bc["alpha"] < 0:
        out("warning boundary: negative Robin coefficient heats the domain when T exceeds T_ext")
    if failures:
        return EXIT_FAIL

    model = build_model(cfg)
    rng = np.random.default_rng(cfg.get("seed", 0))
    T = rng.uniform(0.5, 5.0, 50)
    rho = rng.uniform(0.1, 3.0, (50, model.N))

    inputs = config.onsager_inputs(cfg)
    try:
        mats = build_onsager(inputs, T, rho)
        check_mobility(mats.M)
        ev = np.linalg.eigvalsh(mats.Mext)
        scale = np.abs(mats.Mext).max(axis=(-2, -1))
        if np.any(ev[:, 0] < -1e-10 * scale):
            raise ValidationError("extended Onsager matrix is not positive semi-definite")
        out("ok   transport: Onsager matrices symmetric PSD with kernel (1, ..., 1, 0)")
    except (ValidationError, ValueError) as exc:
        out(f"FAIL transport: {exc}")
        failures += 1

    try:
        w = conserved_from_primal(model, T, rho)
        back = grad_hstar(model, grad_h(model, w))
        wv, bv = w.as_vector(), back.as_vector()
        err = float((np.linalg.norm(bv - wv, axis=-1) / np.linalg.norm(wv, axis=-1)).max())
        if err <= ROUNDTRIP_TOL:
            out(f"ok   thermodynamics: Legendre round trip at 50 seeded states (max rel. error {err:.2e})")
        else:
            out(f"FAIL thermodynamics: Legendre round trip error {err:.2e} exceeds {ROUNDTRIP_TOL:g}")
            failures += 1
    except MixflowError as exc:
        out(f"FAIL thermodynamics: {type(exc).__name__}: {exc}")
        failures += 1
    return EXIT_FAIL if failures else EXIT_OK


# -- simulate --------------------------------------------------------------------

def _initial_fields(cfg, model, grid):
    init = cfg.get("initial", {"type": "uniform", "T": 1.0, "rho": [1.0] * model.N})
    x = grid.x
    rho = np.broadcast_to(np.asarray(init["rho"], dtype=float), (grid.J, model.N)).copy()
    T = np.full(grid.J, float(init["T"]))
    v = np.full(grid.J, float(init.get("v", 0.0)))
    if init["type"] == "sinusoidal":
        wave = np.cos(2.0 * np.pi * init.get("modes", 1) * x / grid.L)
        T = T + init.get("T_amp", 0.0) * wave
        rho = rho + np.outer(wave, init.get("rho_amp", [0.0] * model.N))
        # velocity vanishes at the walls
        v = init.get("v_amp", 0.0) * np.sin(np.pi * init.get("modes", 1) * x / grid.L)
    return T, rho, v


def build_solver(cfg, model):
    s = cfg["solver"]
    grid = Grid1D(float(s.get("L", 1.0)), int(s["J"]))
    scfg = StepConfig(dt=float(s["dt"]), fp_tol=float(s.get("fp_tol", 1e-9)),
                      fp_maxiter=int(s.get("fp_maxiter", 50)), cfl_max=float(s.get("cfl_max", 0.5)),
                      k_levels=tuple(float(k) for k in s.get("k_levels", ())))
    eta, lam = config.viscosities(cfg)
    forces = None
    fb = cfg.get("forces", {"type": "zero"})
    if fb["type"] == "constant":
        b = np.asarray(fb["b"], dtype=float)
        forces = lambda x, t: np.broadcast_to(b, (x.size, b.size))  # noqa: E731
    inputs = SolverInputs(onsager=config.onsager_inputs(cfg), eta=eta, lam=lam, forces=forces)
    bcb = cfg.get("boundary", {"type": "insulated"})
    bc = BoundarySpec(robin=RobinCooling(bcb["alpha"], bcb["T_ext"]) if bcb["type"] == "robin" else None)
    basis = build_basis(model.N)
    return Solver(model, basis, inputs, bc, grid, scfg), basis, grid


def diagnostics_rows(model, k_levels, diags):
    header = (["t"] + [f"mass_{i + 1}" for i in range(model.N)]
              + ["energy", "entropy", "sup_qN", "min_varrho", "max_T", "fp_iters"]
              + [f"E_k{j + 1}" for j in range(len(k_levels))])
    rows = [[d.t, *d.mass, d.energy, d.entropy, d.sup_qN, d.min_rho, d.max_T, d.fp_iters, *d.truncation]
            for d in diags]
    return header, rows


def _write_run(outdir: Path, model, basis, grid, solver, result):
    header, rows = diagnostics_rows(model, solver.cfg.k_levels, result.diagnostics)
    write_csv(outdir / "diagnostics.csv", header, rows)
    snap_header = (["x", "varrho"] + [f"q_{i + 1}" for i in range(model.N)] + ["v", "T"]
                   + [f"rho_{i + 1}" for i in range(model.N)] + ["p"])
    for k, st in enumerate(result.snapshots):
        write_csv(outdir / f"snapshot_{k:05d}.csv", snap_header, snapshot_table(model, basis, grid, st))


def cmd_simulate(cfg, outdir: Path, out: Reporter) -> int:
    if "solver" not in cfg:
        raise config.ConfigError("simulate needs a 'solver' block")
    model = build_model(cfg)
    solver, basis, grid = build_solver(cfg, model)
    T0, rho0, v0 = _initial_fields(cfg, model, grid)
    state0 = init_from_primal(model, basis, grid, T0, rho0, v0)
    outdir.mkdir(parents=True, exist_ok=True)
    snap_every = int(cfg["solver"].get("snapshot_every", 0))
    start = time.perf_counter()
    try:
        result = solver.run(state0, float(cfg["solver"]["t_end"]), snapshot_every=snap_every)
    except SolverError as exc:
        if exc.partial is not None:
            _write_run(outdir, model, basis, grid, solver, exc.partial)
        print(f"error: {type(exc).__name__} at t={exc.t:.17g}: {exc.args[0]}", file=sys.stderr)
        return EXIT_FAIL
    _write_run(outdir, model, basis, grid, solver, result)
    out(f"simulated {len(result.diagnostics) - 1} steps to t={result.diagnostics[-1].t:.6g} "
        f"in {time.perf_counter() - start:.2f}s; wrote {outdir}")
    return EXIT_OK


# -- check-growth ----------------------------------------------------------------

def cmd_check_growth(cfg, p, out: Reporter) -> int:
    model = build_model(cfg)
    spec = config.growth_spec(cfg)
    rep = analysis.check_growth(model, config.growth_p(cfg, p), spec)
    for c in rep.checks:
        out(f"{'ok  ' if c.ok else 'FAIL'} {c.name}: {c.detail}")
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- asymptotics -----------------------------------------------------------------

def cmd_asymptotics(cfg, outdir: Path, out: Reporter) -> int:
    model = build_model(cfg)
    basis = build_basis(model.N)
    a = cfg.get("asymptotics", {})
    qbar = a.get("qbar", [0.0] * (model.N - 1))
    quantities = a.get("quantities", list(analysis.QUANTITIES))
    rows: List[list] = []
    status = EXIT_OK
    for qn in quantities:
        try:
            f = analysis.fit_asymptotics(model, basis, a.get("varrho", 1.0), qbar, tuple(a.get("T_range", (1e2, 1e6))),
                                         qn, n=a.get("n", 12), onsager=config.onsager_inputs(cfg))
        except (MixflowError, ValueError) as exc:
            out(f"FAIL {qn}: {type(exc).__name__}: {exc}")
            rows.append([qn, "nan", "nan", "nan", "nan", "nan", "error", "0", "false"])
            status = EXIT_FAIL
            continue
        ok = f.within()
        out(f"{'ok  ' if ok else 'FAIL'} {qn}: slope {f.slope:.4f} (predicted "
            f"{'-' if f.predicted is None else ('<= ' if f.one_sided else '') + format(f.predicted, '.4f')})")
        rows.append([qn, f.slope, "" if f.predicted is None else f.predicted, f.T_range[0], f.T_range[1],
                     f.residual, f.form, "true" if f.one_sided else "false", "true" if ok else "false"])
        status = status if ok else EXIT_FAIL
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "asymptotics.csv",
              ["quantity", "slope", "predicted", "T_lo", "T_hi", "residual", "form", "one_sided", "within_tol"], rows)
    return status


# -- tabulate --------------------------------------------------------------------

def tabulate_rows(model: MixtureModel, Ts, rhos):
    header = (["T"] + [f"rho_{i + 1}" for i in range(model.N)] + ["p", "rhou", "rhos", "cv"]
              + [f"mu_{i + 1}" for i in range(model.N)])
    rows = []
    for T in Ts:
        for r in rhos:
            e = _evaluate(model, np.asarray(float(T)), np.asarray(r, dtype=float))
            rows.append([T, *r, e.p, _internal_energy(e), -_entropy_neg(e), _heat_capacity(e),
                         *_chemical_potentials(model, e)])
    return header, rows


def cmd_tabulate(cfg, outdir: Path, out: Reporter) -> int:
    if "tabulate" not in cfg:
        raise config.ConfigError("tabulate needs a 'tabulate' block")
    model = build_model(cfg)
    header, rows = tabulate_rows(model, cfg["tabulate"]["T"], cfg["tabulate"]["rho"])
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "eos.csv", header, rows)
    out(f"wrote {len(rows)} rows to {outdir / 'eos.csv'}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixflow", description="Multicomponent mixture thermodynamics and 1-D flow.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("validate", "simulate", "check-growth", "asymptotics", "tabulate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="scenario JSON")
        sp.add_argument("--quiet", action="store_true", help="print only the final result")
        if name in ("simulate", "asymptotics", "tabulate"):
            sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "check-growth":
            sp.add_argument("--p", default=None, help="integrability exponent (> 5)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    out = Reporter(args.quiet)
    try:
        cfg = config.load_config(args.config)
        handlers = {
            "validate": lambda: cmd_validate(cfg, out),
            "simulate": lambda: cmd_simulate(cfg, args.out, out),
            "check-growth": lambda: cmd_check_growth(cfg, args.p, out),
            "asymptotics": lambda: cmd_asymptotics(cfg, args.out, out),
            "tabulate": lambda: cmd_tabulate(cfg, args.out, out),
        }
        return handlers[args.command]()
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MixflowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
