"""Signal fronts, the three regimes, and exact simulation.

The received intensity at detector k is

    n * [ S_1k psi(t - tau_1k) + S_2k psi(t - tau_2k) + lambda_0 ]

where psi ramps from 0 to 1 over a window of width delta as a power of
exponent kappa. kappa decides everything: kappa >= 1/2 keeps the
likelihood smooth, 0 < kappa < 1/2 leaves a cusp at each arrival, and
kappa = 0 is a clean jump. Simulation is by thinning a dominating
homogeneous process, then checked against the integrated intensity.
"""

import numpy as np

from poissonloc import (DetectorArray, FrontSpec, IntensityModel,
                        integrated_intensity, simulate)

print("front shape psi((t - tau)/delta) near the arrival:")
s = np.array([-0.1, 0.0, 0.05, 0.125, 0.25])
for kappa in (1.0, 0.5, 0.25, 0.0):
    front = FrontSpec(kappa=kappa, delta=0.25)
    vals = ", ".join(f"{v:.4f}" for v in front.value(s))
    print(f"  kappa={kappa:4.2f} ({front.regime.name.lower():12s}): "
          f"psi = [{vals}] at s = {s.tolist()}")
print()

array = DetectorArray(
    1.5 * np.column_stack([np.cos(np.deg2rad([10, 77, 152, 218, 295])),
                           np.sin(np.deg2rad([10, 77, 152, 218, 295]))]))
theta0 = [-0.45, 0.14, 0.42, -0.08]
model = IntensityModel(FrontSpec(kappa=0.25, delta=0.25),
                       np.full((2, 5), 2.0), 0.5, 400.0, 2.75)

obs = simulate(model, array, theta0, seed=7)
expected = integrated_intensity(model, array, theta0)
print(f"one cusp observation set at n = {model.n:g}:")
print(f"{'detector':>8s} {'events':>7s} {'expected':>9s} {'ratio':>6s}")
for record in obs.records:
    mean = expected[record.detector]
    print(f"{record.detector:8d} {len(record.events):7d} {mean:9.1f} "
          f"{len(record.events) / mean:6.3f}")
print()
print("Counts track the compensator; repeated seeds give identical files,")
print("so every experiment in this package replays byte for byte.")
