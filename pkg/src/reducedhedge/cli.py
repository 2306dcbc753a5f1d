"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, CorruptFileError, DimensionMismatchError, ReducedHedgeError
from .pipeline import (
    ExperimentConfig,
    Problem,
    _basis_dict,
    _basis_from_dict,
    apply_result,
    build_problem,
    dump_result,
    load_config,
    read_states_csv,
    run_experiment,
    solve_problem,
    write_hedge_csv,
    write_states_csv,
)
from .diagnostics import residual_report
from .pipeline import result_coefficients
from .tensors import export_tensor_csv, read_tensor, write_tensor

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
_CATEGORY_CODES = {"config": EXIT_CONFIG, "numerical": EXIT_NUMERICAL, "io": EXIT_IO}

EPILOG = """exit codes:
  0  success
  2  configuration error (unparseable config, unknown names, invalid parameters)
  3  numerical error (dimension mismatch, non-finite data, singular system, no convergence)
  4  I/O error (unreadable/unwritable files, corrupt tensor headers, unsupported result version)
"""


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result, prob = run_experiment(cfg, threads=args.threads, deterministic=args.deterministic)
    out = args.out or cfg.outputs.get("result") or "result.json"
    dump_result(result, out)
    if cfg.outputs.get("states"):
        write_states_csv(cfg.outputs["states"], prob.states)
    if cfg.outputs.get("hedge_ratios"):
        phi = apply_result(result, prob.states)
        write_hedge_csv(cfg.outputs["hedge_ratios"], phi, result["instruments"])
    if cfg.outputs.get("per_path_csv"):
        xi = result_coefficients(result)
        rr = residual_report(xi, prob.A, prob.b, prob.basis)
        with open(cfg.outputs["per_path_csv"], "w") as fh:
            fh.write("path,residual_norm\n")
            for l, v in enumerate(rr.per_path_norms):
                fh.write(f"{l + 1},{float(v)!r}\n")
    for name, fit in result["fits"].items():
        print(f"{name}: coefficients={fit['coefficients']} "
              f"full_residual={fit['residual_report']['full_residual']:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_apply(args) -> int:
    result = json.loads(Path(args.result).read_text())
    phi = apply_result(result, read_states_csv(args.states), args.formulation)
    out = args.out or "hedge_ratios.csv"
    write_hedge_csv(out, phi, result.get("instruments"))
    print(f"wrote {out} ({phi.n_paths} paths x {phi.n_instruments} instruments)")
    return EXIT_OK


def _cmd_export(args) -> int:
    cfg = load_config(args.config)
    prob = build_problem(cfg)
    d = Path(args.directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(d / "A.hrt", prob.A)
    write_tensor(d / "b.hrt", prob.b)
    write_tensor(d / "X.hrt", prob.basis.ortho_values)
    write_tensor(d / "Y.hrt", prob.Y.ortho_values)
    (d / "basis.json").write_text(json.dumps({
        "basis": _basis_dict(prob.basis),
        "test_basis": "galerkin" if prob.test_basis is None else _basis_dict(prob.test_basis),
    }, indent=2))
    if args.csv:
        export_tensor_csv(d / "A.csv", prob.A)
    print(f"exported A{prob.A.shape}, b{prob.b.shape}, X{prob.basis.ortho_values.shape} to {d}")
    return EXIT_OK


def _cmd_import(args) -> int:
    cfg = load_config(args.config)
    d = Path(args.directory)
    A = read_tensor(d / "A.hrt", 3)
    b = read_tensor(d / "b.hrt", 2)
    X = read_tensor(d / "X.hrt", 2)
    Y = read_tensor(d / "Y.hrt", 2)
    if A.shape[0] != cfg.model.n_paths:
        raise DimensionMismatchError("N", cfg.model.n_paths, A.shape[0], "imported tensors vs config")
    meta = json.loads((d / "basis.json").read_text())
    basis = _basis_from_dict(meta["basis"])
    basis = type(basis)(np.zeros((0, 0)), basis.transform, X, basis.basis_id, basis.dropped, basis.spec)
    test = None
    if meta["test_basis"] != "galerkin":
        tb = _basis_from_dict(meta["test_basis"])
        test = type(tb)(np.zeros((0, 0)), tb.transform, Y, tb.basis_id, tb.dropped, tb.spec)
    prob = Problem(A, b, basis, test, {}, np.zeros(0, dtype=np.int64))
    sweep_free = ExperimentConfig(**{**cfg.__dict__, "lambda_grid": None})
    result = {
        "format": "reducedhedge-result",
        "version": 1,
        "config": cfg.raw,
        "primitives": list(cfg.primitives),
        "instruments": [i.kind for i in cfg.instruments],
        "basis": meta["basis"],
        "test_basis": meta["test_basis"],
        "source": str(d),
    }
    result.update(solve_problem(sweep_free, prob, threads=args.threads,
                                deterministic=args.deterministic))
    out = args.out or "result.json"
    dump_result(result, out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reducedhedge",
        description="Fit reduced stochastic hedge ratios from pathwise sensitivities.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=1, help="assembly worker threads")
    p.add_argument("--deterministic", action="store_true",
                   help="fixed sequential reduction order (bitwise reproducible)")
    p.add_argument("--out", help="result file (overrides output.result in the config)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("apply", help="evaluate a fitted hedge rule on new states")
    p.add_argument("result")
    p.add_argument("states", help="CSV with one column per state variable")
    p.add_argument("--formulation", help="fit to use (default: the result's primary fit)")
    p.add_argument("--out", help="output CSV (default hedge_ratios.csv)")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("export", help="simulate and write A, b, X, Y tensors")
    p.add_argument("config")
    p.add_argument("directory")
    p.add_argument("--csv", action="store_true", help="also write A as CSV for inspection")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("import", help="solve from exported tensors (no simulation)")
    p.add_argument("directory")
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_import)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReducedHedgeError as exc:
        print(f"error ({exc.category}): {exc}", file=sys.stderr)
        return _CATEGORY_CODES[exc.category]
    except (yaml.YAMLError, KeyError) as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error (numerical): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
