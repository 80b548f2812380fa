"""Command-line driver: ``varmfg <experiment> --config run.json --out dir``.

Every run writes ``manifest.json`` (configuration, constants ledger,
library versions, seed and a digest of every output file), one or more CSV
tables and ``summary.txt``.  Outputs depend only on the configuration and
the seed, so two runs with the same inputs are byte-identical.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import (
    MAX_SWEEP_POINTS,
    GridConfig,
    ProblemConfig,
    RunConfig,
    _json_safe,
    load_config,
    parse_axis,
    parse_config,
)
from .energy import estimate_cq
from .errors import BadParameter, ConfigInvalid, MFGError
from .exponents import Regime, build_ledger, classify_regime, mass_critical, sobolev_critical
from .grid import integrate
from .mfg import (
    blowup_monitor,
    hopf_cole_solve,
    multiplicity_probe,
    solve,
    sweep_slopes,
    unboundedness_sweep,
)

log = logging.getLogger("varmfg")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


def fmt(value) -> str:
    """CSV cell: floats at 17 significant digits, everything else as str."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path: Path, rows: list[dict], header: list[str] | None = None) -> None:
    header = header or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(row.get(k, "")) for k in header])


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Output:
    """Collects result files and writes the manifest last."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, rows: list[dict], header: list[str] | None = None) -> None:
        write_csv(self.root / name, rows, header)
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        (self.root / name).write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")
        self.files.append(name)

    def text(self, name: str, body: str) -> None:
        (self.root / name).write_text(body)
        self.files.append(name)

    def manifest(self, cfg: RunConfig, ledger: dict | None, status: str, extra: dict | None = None) -> None:
        doc = {
            "status": status,
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "ledger": ledger,
            "versions": {
                "varmfg": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "files": {name: _digest(self.root / name) for name in sorted(self.files)},
        }
        if extra:
            doc.update(extra)
        (self.root / "manifest.json").write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")


def make_ledger(problem: ProblemConfig, grid: GridConfig, seed: int, cq_samples: int = 40):
    g = grid.build()
    h, c = problem.hamiltonian(), problem.coupling(g)
    n = problem.declared_n(g)
    c_q = estimate_cq(g, cq_samples, q=problem.q, gamma=problem.gamma, seed=seed)
    return build_ledger(h, c, n, c_q, provenance={"c_e": "default 1", "c_s": "default 1"})


def check_regime(ledger, force: bool) -> None:
    if ledger.regime == Regime.BEYOND.value and not force:
        raise ConfigInvalid("problem.q", f"q={ledger.q} is beyond the Sobolev-critical exponent; pass --force")
    if math.isfinite(ledger.cf_threshold) and ledger.c_f >= ledger.cf_threshold:
        log.warning("c_f=%g is not below the %s threshold %g", ledger.c_f, ledger.regime, ledger.cf_threshold)


# --- experiments -----------------------------------------------------------------


def run_solve(cfg: RunConfig, out: Output) -> dict:
    g = cfg.grid.build()
    h, c = cfg.problem.hamiltonian(), cfg.problem.coupling(g)
    n = cfg.problem.declared_n(g)
    sol = solve(g, h, c, cfg.solver, n=n)
    coords = g.mesh()
    rows = []
    for idx in np.ndindex(*g.shape):
        row = {f"x{k}": coords[k][idx] for k in range(g.dim)}
        row.update(m=sol.m[idx], u=sol.u[idx])
        rows.append(row)
    out.csv("solution.csv", rows)
    out.csv("history.csv", [vars(r) for r in sol.history])
    sup_m, monitor = blowup_monitor(sol.history, h.gamma, c.q, n)
    summary = sol.summary()
    summary.pop("history")
    summary.update(sup_m=sup_m, blowup_monitor=monitor)
    out.json("result.json", summary)
    return {
        "lambda": sol.lam,
        "energy": sol.energy.total,
        "duality_residual": sol.duality_residual,
        "system_residual": sol.system_residual,
        "sup_m": sup_m,
    }


def sweep_point(args) -> dict:
    """One sweep point; module level so the worker pool can pickle it."""
    index, values, cfg_doc, force = args
    cfg = parse_config(cfg_doc)
    problem = replace(cfg.problem, **values)
    g = cfg.grid.build()
    n = problem.declared_n(g)
    row = {"index": index, **values}
    regime = classify_regime(problem.gamma, n, problem.q)
    q_bar = mass_critical(problem.gamma, n)
    row.update(regime=regime.value, q_bar=q_bar, q_c=sobolev_critical(problem.gamma, n), unbounded=problem.q > q_bar)
    ledger = make_ledger(problem, cfg.grid, cfg.seed, int(cfg.options.get("cq_samples", 20)))
    row.update(cf_threshold=ledger.cf_threshold, alpha=ledger.alpha)
    base = {"converged": False, "energy": math.nan, "lq_norm_q": math.nan, "duality_residual": math.nan,
            "system_residual": math.nan, "interior_certified": False, "blowup_monitor": math.nan, "error": ""}
    row.update(base)
    if regime is Regime.BEYOND and not force:
        row["error"] = "skipped_beyond"
        return row
    try:
        solver = replace(cfg.solver, minimizer=replace(cfg.solver.minimizer, alpha=max(ledger.alpha, 1.0)))
        sol = solve(g, problem.hamiltonian(), problem.coupling(g), solver, n=n)
    except MFGError as exc:
        row["error"] = type(exc).__name__
        return row
    _, monitor = blowup_monitor(sol.history, problem.gamma, problem.q, n)
    row.update(
        converged=True,
        energy=sol.energy.total,
        lq_norm_q=sol.energy.lq_norm_q,
        duality_residual=sol.duality_residual,
        system_residual=sol.system_residual,
        interior_certified=sol.interior_certified,
        blowup_monitor=monitor[-1],
    )
    return row


def run_sweep(cfg: RunConfig, out: Output, axes: list[str], jobs: int, force: bool) -> dict:
    specs = list(axes) or list(cfg.options.get("axes", []))
    if not specs:
        raise ConfigInvalid("--axis", "empty axis: give one or two name=start:stop:num")
    if len(specs) > 2:
        raise ConfigInvalid("--axis", "at most two sweep axes")
    parsed = [parse_axis(s) for s in specs]
    names = [name for name, _ in parsed]
    if len(set(names)) != len(names):
        raise ConfigInvalid("--axis", "repeated axis name")
    points = list(product(*(vals for _, vals in parsed)))
    if len(points) > MAX_SWEEP_POINTS:
        raise ConfigInvalid("--axis", f"{len(points)} points exceed the limit {MAX_SWEEP_POINTS}")
    doc = cfg.to_dict()
    tasks = [(i, {k: float(v) for k, v in zip(names, pt)}, doc, force) for i, pt in enumerate(points)]
    if jobs == 1:
        rows = [sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_point, tasks))
    rows.sort(key=lambda r: r["index"])
    out.csv("sweep.csv", rows)
    return {"points": len(rows), "converged": sum(bool(r["converged"]) for r in rows), "axes": specs}


def run_multiplicity(cfg: RunConfig, out: Output) -> dict:
    g = cfg.grid.build()
    h, c = cfg.problem.hamiltonian(), cfg.problem.coupling(g)
    mode = int(cfg.options.get("mode", 2))
    phi = np.cos(mode * np.pi * g.mesh()[0] / g.lengths[0])
    eps = cfg.options.get("eps", np.geomspace(1e-4, 0.3, 60).tolist())
    rows = multiplicity_probe(g, h.lagrangian(), c, phi, eps)
    out.csv("multiplicity.csv", rows)
    best = min(rows, key=lambda r: r["gap"])
    return {"best_eps": best["eps"], "best_gap": best["gap"], "below_trivial": any(r["below_trivial"] for r in rows)}


def run_unbounded(cfg: RunConfig, out: Output) -> dict:
    g = cfg.grid.build()
    h, c = cfg.problem.hamiltonian(), cfg.problem.coupling(g)
    lambdas = cfg.options.get("lambdas", np.geomspace(4.0, 100.0, 12).tolist())
    rows = unboundedness_sweep(g, h.lagrangian(), c, lambdas, power=int(cfg.options.get("power", 8)))
    out.csv("unbounded.csv", rows)
    kin, cpl = sweep_slopes(rows)
    n = cfg.problem.declared_n(g)
    return {
        "slope_kinetic": kin,
        "slope_coupling": cpl,
        "expected_kinetic": h.gamma_conj,
        "expected_coupling": n * (c.q - 1.0),
        "initial_energy": rows[0]["energy"],
        "final_energy": rows[-1]["energy"],
    }


def run_exponents(cfg: RunConfig, out: Output) -> dict:
    gamma, q = cfg.problem.gamma, cfg.problem.q
    dims = cfg.options.get("dims", [1, 2, 3, 4])
    rows = [
        {
            "n": n,
            "q_bar": mass_critical(gamma, n),
            "q_c": sobolev_critical(gamma, n),
            "regime_of_q": classify_regime(gamma, n, q).value,
        }
        for n in dims
    ]
    out.csv("exponents.csv", rows)
    return {"gamma": gamma, "q": q, "rows": len(rows)}


def run_hopf_cole(cfg: RunConfig, out: Output) -> dict:
    if cfg.problem.gamma != 2.0:
        raise ConfigInvalid("problem.gamma", "hopf-cole-compare needs gamma = 2")
    g = cfg.grid.build()
    h, c = cfg.problem.hamiltonian(), cfg.problem.coupling(g)
    sol = solve(g, h, c, cfg.solver, n=cfg.problem.declared_n(g))
    m_hc, lam_hc = hopf_cole_solve(g, c, kappa=2.0 / h.coef, phi0=np.sqrt(sol.m))
    coords = g.mesh()
    rows = []
    for idx in np.ndindex(*g.shape):
        row = {f"x{k}": coords[k][idx] for k in range(g.dim)}
        row.update(m_solve=sol.m[idx], m_hopf_cole=m_hc[idx])
        rows.append(row)
    out.csv("hopf_cole.csv", rows)
    return {
        "lambda_solve": sol.lam,
        "lambda_hopf_cole": lam_hc,
        "l1_gap": integrate(g, np.abs(sol.m - m_hc)),
        "lambda_gap": abs(sol.lam - lam_hc),
    }


SELFTEST_CONFIG = {
    "experiment": "solve",
    "problem": {"gamma": 2.0, "c_h": 2.0, "q": 2.0, "c_f": 6.0, "sign": -1},
    "grid": {"dim": 1, "cells": 32},
    "solver": {"epsilons": [0.1], "starts": 3},
}


def run_selftest(out: Output, seed: int) -> tuple[RunConfig, dict]:
    """Small fixed solve, multiplicity probe and exponent table in one directory."""
    doc = json.loads(json.dumps(SELFTEST_CONFIG))
    doc["seed"] = seed
    cfg = parse_config(doc)
    result = {"solve": run_solve(cfg, out)}
    mcfg = parse_config({**doc, "experiment": "multiplicity", "problem": {"gamma": 1.5, "q": 2.0, "c_f": 1.0},
                         "grid": {"dim": 1, "cells": 64}})
    result["multiplicity"] = run_multiplicity(mcfg, out)
    result["exponents"] = run_exponents(parse_config({**doc, "experiment": "exponents"}), out)
    return cfg, result


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varmfg", description="Stationary variational mean field game experiments.")
    parser.add_argument(
        "command",
        choices=("solve", "sweep", "multiplicity", "unbounded", "exponents", "hopf-cole-compare", "selftest"),
    )
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="seed (overrides the configuration)")
    parser.add_argument("--force", action="store_true", help="allow runs beyond the Sobolev-critical exponent")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    parser.add_argument("--axis", action="append", default=[], help="sweep axis name=start:stop:num (q, c_f, gamma)")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("MFG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs: must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "selftest":
            out = Output(Path(args.out or "selftest_out"))
            cfg, result = run_selftest(out, 0 if args.seed is None else args.seed)
            ledger = make_ledger(cfg.problem, cfg.grid, cfg.seed).to_dict()
            return _finish(out, cfg, ledger, "ok", result)
        if not args.config:
            raise ConfigInvalid("--config", "required for this command")
        cfg = load_config(args.config)
        cfg = replace(cfg, experiment=args.command)
        if args.seed is not None:
            cfg = replace(
                cfg, seed=args.seed, solver=replace(cfg.solver, minimizer=replace(cfg.solver.minimizer, seed=args.seed))
            )
        ledger_obj = None
        if args.command != "exponents":
            ledger_obj = make_ledger(cfg.problem, cfg.grid, cfg.seed, int(cfg.options.get("cq_samples", 40)))
            if args.command in ("solve", "hopf-cole-compare"):
                check_regime(ledger_obj, args.force)
        ledger = None if ledger_obj is None else ledger_obj.to_dict()
        out = Output(Path(args.out or cfg.output_dir))
    except (ConfigInvalid, BadParameter) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "solve":
            result = run_solve(cfg, out)
        elif args.command == "sweep":
            result = run_sweep(cfg, out, args.axis, args.jobs, args.force)
        elif args.command == "multiplicity":
            result = run_multiplicity(cfg, out)
        elif args.command == "unbounded":
            result = run_unbounded(cfg, out)
        elif args.command == "exponents":
            result = run_exponents(cfg, out)
        else:
            result = run_hopf_cole(cfg, out)
    except (ConfigInvalid, BadParameter) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MFGError as exc:
        log.error("solver failure: %s", exc)
        return _finish(out, cfg, ledger, "failed", {"error": type(exc).__name__, "message": str(exc)}, EXIT_SOLVER)
    return _finish(out, cfg, ledger, "ok", result)


def _finish(out: Output, cfg: RunConfig, ledger, status: str, result: dict, code: int = EXIT_OK) -> int:
    lines = [f"experiment: {cfg.experiment}", f"status: {status}", f"seed: {cfg.seed}"]
    for key in sorted(result):
        value = result[key]
        lines.append(f"{key}: {fmt(value) if not isinstance(value, (dict, list)) else json.dumps(_json_safe(value), sort_keys=True)}")
    out.text("summary.txt", "\n".join(lines) + "\n")
    out.manifest(cfg, ledger, status, {"result": result})
    print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())
