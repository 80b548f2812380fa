"""JSON run configuration: parsing, validation and conversion to solver objects.

A configuration is one JSON document::

    {
      "experiment": "solve",
      "seed": 0,
      "output_dir": "out",
      "problem": {"gamma": 2.0, "c_h": 1.0, "k_h": 0.0, "q": 2.0,
                  "c_f": 1.0, "k_f": 0.0, "sign": -1, "n": null,
                  "weights": {"a": "unit", "b": "unit"}},
      "grid": {"dim": 1, "cells": 128},
      "solver": {"epsilons": [0.2, 0.1, 0.05, 0.025], "starts": 4,
                 "minimizer": {"grad_tol": 1e-8}},
      "experiment_options": {...}
    }

Every validation failure raises :class:`ConfigInvalid` naming the dotted
path of the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import BadParameter, ConfigInvalid
from .grid import Grid
from .minimizer import MinimizerConfig
from .mfg import SolveConfig
from .model import Coupling, Hamiltonian

EXPERIMENTS = ("solve", "sweep", "multiplicity", "unbounded", "exponents", "hopf-cole-compare")
WEIGHT_KINDS = ("unit", "cosine")
SWEEP_AXES = ("q", "c_f", "gamma")
MAX_SWEEP_POINTS = 10_000


@dataclass(frozen=True)
class ProblemConfig:
    gamma: float
    q: float
    c_f: float
    c_h: float = 1.0
    k_h: float = 0.0
    k_f: float = 0.0
    sign: int = -1
    n: int | None = None
    weight_a: str = "unit"
    weight_b: str = "unit"

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if not k.startswith("weight_")}
        out["weights"] = {"a": self.weight_a, "b": self.weight_b}
        return out

    def hamiltonian(self) -> Hamiltonian:
        return Hamiltonian(self.gamma, self.c_h, self.k_h)

    def coupling(self, g: Grid) -> Coupling:
        return Coupling(
            self.c_f,
            self.q,
            self.k_f,
            self.sign,
            a_weight=weight_field(g, self.weight_a, positive=True),
            b_weight=weight_field(g, self.weight_b, positive=False),
        )

    def declared_n(self, g: Grid) -> int:
        return g.dim if self.n is None else self.n


@dataclass(frozen=True)
class GridConfig:
    dim: int = 1
    cells: int = 128

    def build(self) -> Grid:
        return Grid(self.dim, self.cells)


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolveConfig = field(default_factory=SolveConfig)
    experiment: str = "solve"
    output_dir: str = "out"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        solver = asdict(self.solver)
        solver["epsilons"] = list(self.solver.epsilons)
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "problem": self.problem.to_dict(),
            "grid": asdict(self.grid),
            "solver": _json_safe(solver),
            "experiment_options": _json_safe(self.options),
        }


def weight_field(g: Grid, kind: str, positive: bool):
    """None for unit weights, else a smooth cosine profile on the cell centres.

    The positive variant 1 + prod cos / 2 lies in [1/2, 3/2]; the signed
    variant prod cos lies in [-1, 1].
    """
    if kind == "unit":
        return None
    prod = np.ones(g.shape)
    for axis, x in enumerate(g.mesh()):
        prod = prod * np.cos(np.pi * x / g.lengths[axis])
    return 1.0 + 0.5 * prod if positive else prod


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _number(block: dict, key: str, path: str, *, default=None, required=False, integer=False):
    if key not in block or block[key] is None:
        if required:
            raise ConfigInvalid(f"{path}.{key}", "missing required field")
        return default
    value = block[key]
    if value == "inf":
        value = math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(f"{path}.{key}", f"expected a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigInvalid(f"{path}.{key}", f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _block(doc: dict, key: str, *, required: bool = False) -> dict:
    if key not in doc:
        if required:
            raise ConfigInvalid(key, "missing required block")
        return {}
    if not isinstance(doc[key], dict):
        raise ConfigInvalid(key, "expected a JSON object")
    return doc[key]


def _unknown(block: dict, allowed, path: str) -> None:
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigInvalid(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def parse_problem(block: dict) -> ProblemConfig:
    _unknown(block, ("gamma", "c_h", "k_h", "q", "c_f", "k_f", "sign", "n", "weights"), "problem")
    gamma = _number(block, "gamma", "problem", required=True)
    if not gamma > 1:
        raise ConfigInvalid("problem.gamma", "must exceed 1")
    q = _number(block, "q", "problem", required=True)
    if not q > 1:
        raise ConfigInvalid("problem.q", "must exceed 1")
    c_f = _number(block, "c_f", "problem", required=True)
    c_h = _number(block, "c_h", "problem", default=1.0)
    k_h = _number(block, "k_h", "problem", default=0.0)
    k_f = _number(block, "k_f", "problem", default=0.0)
    for name, value in (("c_f", c_f), ("k_h", k_h), ("k_f", k_f)):
        if value < 0:
            raise ConfigInvalid(f"problem.{name}", "must be nonnegative")
    if not c_h > 0:
        raise ConfigInvalid("problem.c_h", "must be positive")
    sign = _number(block, "sign", "problem", default=-1, integer=True)
    if sign not in (-1, 1):
        raise ConfigInvalid("problem.sign", "must be -1 (aggregative) or +1 (repulsive)")
    n = _number(block, "n", "problem", default=None, integer=True)
    if n is not None and n < 1:
        raise ConfigInvalid("problem.n", "must be a positive integer")
    weights = block.get("weights", {}) or {}
    if not isinstance(weights, dict):
        raise ConfigInvalid("problem.weights", "expected an object with keys a and b")
    _unknown(weights, ("a", "b"), "problem.weights")
    kinds = {}
    for key in ("a", "b"):
        kind = weights.get(key, "unit")
        if kind not in WEIGHT_KINDS:
            raise ConfigInvalid(f"problem.weights.{key}", f"expected one of {WEIGHT_KINDS}")
        kinds[key] = kind
    return ProblemConfig(gamma, q, c_f, c_h, k_h, k_f, sign, n, kinds["a"], kinds["b"])


def parse_grid(block: dict) -> GridConfig:
    _unknown(block, ("dim", "cells"), "grid")
    dim = _number(block, "dim", "grid", default=1, integer=True)
    cells = _number(block, "cells", "grid", default=128, integer=True)
    if dim not in (1, 2):
        raise ConfigInvalid("grid.dim", "must be 1 or 2")
    if cells < 4:
        raise ConfigInvalid("grid.cells", "need at least 4 cells per axis")
    return GridConfig(dim, cells)


def parse_solver(block: dict, seed: int) -> SolveConfig:
    names = {f.name for f in fields(SolveConfig)}
    _unknown(block, names, "solver")
    kwargs = {}
    for key, value in block.items():
        if key == "minimizer":
            continue
        if key == "epsilons":
            if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
                raise ConfigInvalid("solver.epsilons", "expected a list of numbers")
            kwargs[key] = tuple(float(v) for v in value)
        elif key == "regime_override":
            kwargs[key] = value
        elif key in ("final_unmollified",):
            if not isinstance(value, bool):
                raise ConfigInvalid(f"solver.{key}", "expected true or false")
            kwargs[key] = value
        else:
            kwargs[key] = _number(block, key, "solver", integer=key in ("max_refresh", "starts"))
    mblock = block.get("minimizer", {}) or {}
    if not isinstance(mblock, dict):
        raise ConfigInvalid("solver.minimizer", "expected a JSON object")
    mnames = {f.name for f in fields(MinimizerConfig)}
    _unknown(mblock, mnames, "solver.minimizer")
    mkw = {}
    for key, value in mblock.items():
        if key == "ball_mode":
            mkw[key] = value
        elif key == "trace":
            mkw[key] = bool(value)
        else:
            mkw[key] = _number(mblock, key, "solver.minimizer", integer=key in ("max_iters", "seed", "memory"))
    mkw.setdefault("seed", seed)
    mkw.setdefault("grad_tol", 1e-8)
    try:
        kwargs["minimizer"] = MinimizerConfig(**mkw)
    except BadParameter as exc:
        raise ConfigInvalid("solver.minimizer", str(exc)) from exc
    try:
        return SolveConfig(**kwargs)
    except BadParameter as exc:
        raise ConfigInvalid("solver", str(exc)) from exc


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigInvalid("<root>", "expected a JSON object")
    _unknown(doc, ("experiment", "seed", "output_dir", "problem", "grid", "solver", "experiment_options"), "")
    experiment = doc.get("experiment", "solve")
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid("experiment", f"expected one of {EXPERIMENTS}")
    seed = _number(doc, "seed", "<root>", default=0, integer=True)
    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigInvalid("output_dir", "expected a string")
    problem = parse_problem(_block(doc, "problem", required=experiment != "exponents") or {"gamma": 2.0, "q": 2.0, "c_f": 0.0})
    grid = parse_grid(_block(doc, "grid"))
    solver = parse_solver(_block(doc, "solver"), seed)
    options = _block(doc, "experiment_options")
    return RunConfig(problem, grid, solver, experiment, output_dir, seed, dict(options))


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigInvalid("--config", f"no such file {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("--config", f"invalid JSON: {exc}") from exc
    return parse_config(doc)


def parse_axis(spec: str) -> tuple[str, np.ndarray]:
    """``name=start:stop:num`` into (name, linspace)."""
    name, sep, rng = spec.partition("=")
    if not sep or name not in SWEEP_AXES:
        raise ConfigInvalid("--axis", f"expected name=start:stop:num with name in {SWEEP_AXES}")
    parts = rng.split(":")
    try:
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError) as exc:
        raise ConfigInvalid(f"--axis {name}", "expected start:stop:num") from exc
    if len(parts) != 3 or num < 1:
        raise ConfigInvalid(f"--axis {name}", "empty axis")
    return name, np.linspace(start, stop, num)
