"""A complete (small) convergence-rate experiment.

Simulate -> estimate over a ladder of n values, many replications each,
then regress ln RMSE on ln n. In the smooth regime the slope must come
out near -1/2. This uses the same harness the acceptance suite runs at
full scale; here the ladder is short so it finishes in seconds.
"""

import pathlib
import tempfile

import numpy as np

from poissonloc import (DetectorArray, ExperimentConfig, FrontSpec,
                        IntensityModel, ParameterBox, run_rate_experiment)

array = DetectorArray(
    1.5 * np.column_stack([np.cos(np.deg2rad([10, 77, 152, 218, 295])),
                           np.sin(np.deg2rad([10, 77, 152, 218, 295]))]))
box = ParameterBox([-0.8, -0.45, 0.1, -0.35], [-0.1, 0.35, 0.8, 0.45])
model = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                       np.full((2, 5), 2.0), 0.5, 1.0, 2.75)

out_dir = pathlib.Path(tempfile.mkdtemp(prefix="rate-demo-"))
config = ExperimentConfig(
    scenario="demo-smooth", array=array, box=box,
    theta0=[-0.45, 0.14, 0.42, -0.08], model=model,
    n_ladder=(60, 120, 250, 500), replications=60, master_seed=7,
    estimator="mle",
    estimator_options=dict(lattice=3, refine_starts=1),
    out_dir=str(out_dir))

report = run_rate_experiment(config)

print(f"{'n':>6s} {'RMSE':>9s}")
for n, rmse in zip(report.n_values, report.rmse):
    print(f"{n:6.0f} {rmse:9.5f}")
print()
print(f"fitted slope {report.slope:.3f} (se {report.slope_se:.3f}), "
      f"target {report.target} +/- {report.tolerance}: "
      f"{'pass' if report.passed else 'fail'}")
print()
print(f"artifacts in {out_dir}:")
for path in sorted(out_dir.iterdir()):
    print(f"  {path.name} ({path.stat().st_size} bytes)")
print()
print("results.csv replays byte-identically for any worker count; the")
print("cusp and change-point versions of this experiment only swap the")
print("model's kappa and the estimator for the posterior mean.")
