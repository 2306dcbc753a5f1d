"""Experiment pipeline: simulate, differentiate, build bases, assemble, solve, diagnose.

Configuration is a nested mapping (YAML on disk); results are a JSON-ready
dict that is self-contained for out-of-sample reconstruction: it stores the
basis spec, the orthonormalising transform and the fitted coefficients.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from . import __version__
from .basis import BasisSet, BasisSpec, evaluate_basis, orthonormalize
from .diagnostics import compare_formulations, residual_report
from .errors import ConfigError, DimensionMismatchError, FormatVersionError, MissingStateError
from .models import (
    GbmModel,
    InstrumentSpec,
    ProductSpec,
    hedge_instrument_sensitivities,
    kink_paths,
    primitive_sensitivities,
    simulate,
)
from .reduce_ls import assemble_normal, ls_objective
from .reduce_projected import assemble_projected
from .solve import RegularizationSpec, solve_reduced
from .tensors import HedgeCoefficients, HedgeRatioMatrix, reconstruct_hedge

__all__ = [
    "ExperimentConfig",
    "Problem",
    "load_config",
    "build_problem",
    "run_experiment",
    "solve_problem",
    "apply_result",
    "read_states_csv",
    "write_states_csv",
    "write_hedge_csv",
    "RESULT_FORMAT",
    "RESULT_VERSION",
]

RESULT_FORMAT = "reducedhedge-result"
RESULT_VERSION = 1
FORMULATIONS = ("ls", "projected", "both", "compare")


def _req(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping) or key not in d:
        raise ConfigError(f"missing key {key!r} in {where}")
    return d[key]


@dataclass
class ExperimentConfig:
    model: GbmModel
    product: ProductSpec
    primitives: list
    instruments: list
    basis: BasisSpec
    drop_tol: float
    test_basis: Optional[BasisSpec]  # None means Galerkin
    formulation: str
    regularization: RegularizationSpec
    lambda_grid: Optional[list]
    holdout_seed: int
    deterministic: bool
    outputs: dict
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Mapping, base_dir: Path | str = ".") -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("configuration must be a mapping")
        base_dir = Path(base_dir)
        try:
            m = _req(raw, "model", "config")
            model = GbmModel(
                spot=float(_req(m, "spot", "model")),
                rate=float(m.get("rate", 0.0)),
                volatility=float(_req(m, "volatility", "model")),
                horizon=float(_req(m, "horizon", "model")),
                observation_time=float(m.get("observation_time", 0.0)),
                n_steps=int(m.get("steps", 1)),
                n_paths=int(_req(raw, "paths", "config")),
                seed=int(raw.get("seed", 0)),
            )
            p = _req(raw, "product", "config")
            product = ProductSpec(str(_req(p, "kind", "product")), float(_req(p, "strike", "product")),
                                  None if p.get("maturity") is None else float(p["maturity"]))
            product.maturity_for(model)
            primitives = [str(x) for x in raw.get("primitives", ["S_t", "D_tT"])]
            instruments = [
                InstrumentSpec(str(_req(i, "kind", "instrument")), float(i.get("scale", 1.0)),
                               None if i.get("strike") is None else float(i["strike"]),
                               None if i.get("volatility") is None else float(i["volatility"]))
                for i in _req(raw, "instruments", "config")
            ]
            b = _req(raw, "basis", "config")
            basis = BasisSpec.from_dict(b)
            drop_tol = float(b.get("drop_tol", 1e-8))
            tb = raw.get("test_basis", "galerkin")
            test_basis = None if tb in (None, "galerkin") else BasisSpec.from_dict(tb)
            formulation = str(raw.get("formulation", "ls"))
            if formulation not in FORMULATIONS:
                raise ConfigError(f"formulation must be one of {FORMULATIONS}, got {formulation!r}")
            r = raw.get("regularization") or {}
            reg = RegularizationSpec(float(r.get("lambda", 0.0)), r.get("L"), r.get("z0"), r.get("W"))
            grid = raw.get("lambda_grid")
            if grid is not None:
                grid = [float(v) for v in grid]
                if any(v < 0 or not np.isfinite(v) for v in grid) or grid != sorted(grid):
                    raise ConfigError("lambda_grid must be finite, non-negative and ascending")
            outputs = {}
            for key, val in (raw.get("output") or {}).items():
                outputs[key] = None if val is None else str(base_dir / str(val))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, MissingStateError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(model, product, primitives, instruments, basis, drop_tol, test_basis,
                   formulation, reg, grid, int(raw.get("holdout_seed", model.seed + 1)),
                   bool(raw.get("deterministic", False)), outputs, dict(raw))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, path.parent)


@dataclass(eq=False)
class Problem:
    """Simulated data for one fit: sensitivities, states and bases."""

    A: np.ndarray
    b: np.ndarray
    basis: BasisSet
    test_basis: Optional[BasisSet]
    states: dict
    kinks: np.ndarray

    @property
    def Y(self):
        return self.basis if self.test_basis is None else self.test_basis


def build_problem(cfg: ExperimentConfig, seed: Optional[int] = None,
                  basis: Optional[BasisSet] = None, test_basis: Optional[BasisSet] = None) -> Problem:
    """Simulate and differentiate. Passing fitted bases reuses their transforms (out of sample)."""
    model = cfg.model if seed is None else GbmModel(**{**cfg.model.__dict__, "seed": seed})
    paths = simulate(model, extra_times=[cfg.product.maturity_for(model)])
    states = paths.as_dict()
    A = hedge_instrument_sensitivities(paths, cfg.instruments, cfg.primitives).values
    b = primitive_sensitivities(paths, cfg.product, cfg.primitives).values
    if basis is None:
        basis = orthonormalize(evaluate_basis(cfg.basis, states), cfg.drop_tol, cfg.basis)
    else:
        basis = _refit(basis, states)
    if cfg.test_basis is not None:
        if test_basis is None:
            test_basis = orthonormalize(evaluate_basis(cfg.test_basis, states), cfg.drop_tol,
                                        cfg.test_basis)
        else:
            test_basis = _refit(test_basis, states)
    return Problem(A, b, basis, test_basis, states, kink_paths(paths, cfg.product))


def _refit(basis: BasisSet, states) -> BasisSet:
    Z = evaluate_basis(basis.spec, states)
    return BasisSet(Z, basis.transform, Z @ basis.transform, basis.basis_id, basis.dropped, basis.spec)


def _methods(formulation: str) -> list:
    return {"ls": ["ls"], "projected": ["projected"]}.get(formulation, ["ls", "projected"])


def _fit(method: str, prob: Problem, reg: RegularizationSpec, assembly: dict):
    if method == "ls":
        system = assemble_normal(prob.A, prob.b, prob.basis, **assembly)
        return solve_reduced(system, reg, prob.basis.basis_id)
    system = assemble_projected(prob.A, prob.b, prob.basis, prob.Y, **assembly)
    return solve_reduced(system, reg, prob.basis.basis_id)


def _basis_dict(basis: BasisSet) -> dict:
    return {
        "spec": basis.spec.to_dict(),
        "transform": basis.transform.tolist(),
        "basis_id": basis.basis_id,
        "dropped": list(basis.dropped),
    }


def _basis_from_dict(d: Mapping) -> BasisSet:
    spec = BasisSpec.from_dict(d["spec"])
    T = np.asarray(d["transform"], dtype=np.float64)
    empty = np.zeros((0, T.shape[0]))
    return BasisSet(empty, T, empty @ T, d["basis_id"], tuple(d.get("dropped", ())), spec)


def solve_problem(cfg: ExperimentConfig, prob: Problem, *, threads: int = 1,
                  deterministic: bool = False) -> dict:
    """Fit, diagnose and (optionally) sweep the regularisation grid on a simulated problem."""
    assembly = {"mode": "sequential" if deterministic or cfg.deterministic else "pairwise",
                "threads": threads}
    fits = {}
    for method in _methods(cfg.formulation):
        xi, rep = _fit(method, prob, cfg.regularization, assembly)
        rr = residual_report(xi, prob.A, prob.b, prob.basis, prob.Y)
        fits[method] = {"coefficients": xi.values.tolist(), "solve_report": rep.to_dict(),
                        "residual_report": rr.to_dict()}
    out: dict[str, Any] = {"fits": fits, "primary": _methods(cfg.formulation)[0]}
    if cfg.formulation == "compare":
        comp = compare_formulations(prob.A, prob.b, prob.basis, prob.Y, cfg.regularization,
                                    **assembly)
        out["comparison"] = comp.to_dict()
    if cfg.lambda_grid:
        holdout = build_problem(cfg, cfg.holdout_seed, prob.basis, prob.test_basis)
        sweep = []
        for lam in cfg.lambda_grid:
            reg = RegularizationSpec(lam, cfg.regularization.L, cfg.regularization.z0)
            entry = {"lambda": lam}
            for method in _methods(cfg.formulation):
                xi, rep = _fit(method, prob, reg, assembly)
                entry[method] = {
                    "solve_report": rep.to_dict(),
                    "in_sample_residual": ls_objective(xi, prob.A, prob.b, prob.basis),
                    "holdout_residual": ls_objective(xi, holdout.A, holdout.b, holdout.basis),
                }
            sweep.append(entry)
        out["lambda_sweep"] = sweep
    return out


def run_experiment(cfg: ExperimentConfig, *, threads: int = 1, deterministic: bool = False) -> tuple:
    """Execute the full pipeline. Returns ``(result_dict, problem)``."""
    start = time.perf_counter()
    prob = build_problem(cfg)
    result = {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "config": cfg.raw,
        "primitives": list(cfg.primitives),
        "instruments": [i.kind for i in cfg.instruments],
        "basis": _basis_dict(prob.basis),
        "test_basis": "galerkin" if prob.test_basis is None else _basis_dict(prob.test_basis),
    }
    result.update(solve_problem(cfg, prob, threads=threads, deterministic=deterministic))
    result["metadata"] = {
        "n_paths": int(prob.A.shape[0]),
        "kink_paths": int(prob.kinks.size),
        "package_version": __version__,
        "runtime_seconds": time.perf_counter() - start,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return result, prob


def result_coefficients(result: Mapping, formulation: Optional[str] = None) -> HedgeCoefficients:
    name = formulation or result.get("primary", "ls")
    if name in result.get("fits", {}):
        values = result["fits"][name]["coefficients"]
    elif name in result.get("comparison", {}):
        values = result["comparison"][name]["coefficients"]
    else:
        raise ConfigError(f"result holds no fit named {name!r}")
    return HedgeCoefficients(np.asarray(values, dtype=np.float64), result["basis"]["basis_id"])


def apply_result(result: Mapping, states: Mapping[str, np.ndarray],
                 formulation: Optional[str] = None) -> HedgeRatioMatrix:
    """Evaluate a stored hedge rule on new states."""
    if result.get("format") != RESULT_FORMAT or result.get("version") != RESULT_VERSION:
        raise FormatVersionError(
            f"unsupported result file (format={result.get('format')!r}, "
            f"version={result.get('version')!r}); expected {RESULT_FORMAT!r} v{RESULT_VERSION}")
    stored = _basis_from_dict(result["basis"])
    X = evaluate_basis(stored.spec, states) @ stored.transform
    return reconstruct_hedge(result_coefficients(result, formulation), X)


def read_states_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DimensionMismatchError("rows", ">= 1", 0, str(path))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [() for _ in header]
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def write_states_csv(path, states: Mapping[str, np.ndarray]) -> None:
    names = list(states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(np.asarray(states[k]) for k in names)):
            w.writerow([repr(float(v)) for v in row])


def write_hedge_csv(path, phi: HedgeRatioMatrix, names=None) -> None:
    m = phi.n_instruments
    names = names or [f"instrument_{j + 1}" for j in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path"] + list(names))
        for l, row in enumerate(phi.values):
            w.writerow([l + 1] + [repr(float(v)) for v in row])


def dump_result(result: Mapping, path) -> None:
    Path(path).write_text(json.dumps(result, indent=2, sort_keys=False) + "\n")
