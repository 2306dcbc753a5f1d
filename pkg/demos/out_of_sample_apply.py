"""
Fit once, hedge many
====================

Run an experiment config, then reuse the stored hedge rule on fresh paths
without refitting. Everything needed lives in the result file: the basis
features, the orthonormalising transform and the coefficients.
"""

import json
import shutil
import tempfile
from pathlib import Path

import numpy as np

from reducedhedge.cli import main
from reducedhedge.diagnostics import residual_report
from reducedhedge.pipeline import apply_result, build_problem, load_config, result_coefficients

# Output paths in a config are relative to the config file, so work on a copy.
work = Path(tempfile.mkdtemp())
config = work / "call_compare.yaml"
shutil.copy(Path(__file__).resolve().parents[1] / "configs" / "call_compare.yaml", config)
out = work / "result.json"
assert main(["run", str(config), "--out", str(out), "--deterministic"]) == 0
result = json.loads(out.read_text())

# Fresh paths from a different seed, with the training basis transform reused.
cfg = load_config(config)
train = build_problem(cfg)
fresh = build_problem(cfg, seed=cfg.holdout_seed, basis=train.basis)

phi = apply_result(result, fresh.states)
print("hedge ratios on new paths:", phi.values.shape)
print(phi.values[:5])

xi = result_coefficients(result)
r_in = residual_report(xi, train.A, train.b, train.basis).full_residual
r_out = residual_report(xi, fresh.A, fresh.b, fresh.basis).full_residual
print(f"in-sample residual {r_in:.4f}, out-of-sample {r_out:.4f}")
