"""Point estimates: likelihood maximization vs posterior mean.

The MLE drives the smooth regime. Outside it the posterior mean (BE,
computed by self-normalized importance sampling around the likelihood
mode) is the estimator of choice: it stays rate-optimal when the
likelihood has cusps or jumps where the MLE theory breaks down.
"""

import numpy as np

from poissonloc import (DetectorArray, FrontSpec, IntensityModel,
                        ParameterBox, bayes_estimate, mle, simulate,
                        swap_min_error)

array = DetectorArray(
    1.5 * np.column_stack([np.cos(np.deg2rad([10, 77, 152, 218, 295])),
                           np.sin(np.deg2rad([10, 77, 152, 218, 295]))]))
box = ParameterBox([-0.8, -0.45, 0.1, -0.35], [-0.1, 0.35, 0.8, 0.45])
theta0 = np.array([-0.45, 0.14, 0.42, -0.08])

print(f"truth: {theta0.tolist()}  (n = 1000 for every run)\n")
for kappa, label in [(1.0, "smooth"), (0.25, "cusp"), (0.0, "change point")]:
    model = IntensityModel(FrontSpec(kappa=kappa, delta=0.25),
                           np.full((2, 5), 2.0), 0.5, 1000.0, 2.75)
    obs = simulate(model, array, theta0, seed=31)

    ml = mle(obs, box, lattice=4, refine_starts=2)
    be = bayes_estimate(obs, box, draws=4000, seed=1, lattice=4,
                        refine_starts=2)
    print(f"{label}:")
    print(f"  mle  error {swap_min_error(ml.values, theta0):.5f} "
          f"({ml.evaluations} likelihood evaluations, "
          f"boundary={ml.boundary})")
    print(f"  be   error {swap_min_error(be.values, theta0):.5f} "
          f"(ESS {be.ess:.0f} of 4000 draws, "
          f"{be.attempts} attempt(s))")
    for w in be.warnings:
        print(f"  note: {w}")
    print()

print("The BE run reports its importance-sampling health (ESS); a low")
print("value triggers automatic draw doubling and, if that fails, a")
print("warning instead of a silently bad estimate.")
