"""Compliance is stable under source perturbations, with a usable constant.

|C(f1) - C(f2)| is controlled by A * z(||f1 - f2||) where z is an
explicit modulus built from p. The demo calibrates A on a few random
source pairs, checks it on held-out pairs, then uses the certified
bound to control compliance along a truncation of a spiky source
without solving anything again.
"""

from pcompliance import (
    GaussianBump,
    GridDiscretization,
    stability_experiment,
    truncation_bounds,
)

p = 2.0
bound = stability_experiment(p, nodes_per_side=65, pairs=10,
                             calibration_count=5, seed=0)
print(f"p = {p}: modulus z(t) = {bound.z_form}, "
      f"source norm exponent q0 = {bound.q0}")
print(f"calibrated A = {bound.measured_A:.6f} on "
      f"{len(bound.calibration)} pairs "
      f"(safety factor {bound.calibration_safety})")
print(f"holdout violations: {bound.violations} / {len(bound.holdout)}")
for r in bound.holdout:
    print(f"  C1 = {r.compliance_1:.5f}  C2 = {r.compliance_2:.5f}  "
          f"A z(gap) = {bound.measured_A * r.z_value:.3e}  "
          f"ok = {r.satisfied(bound.measured_A)}")

# a narrow tall bump: truncate it at rising levels and bound the
# compliance drift by A z(||f - f_m||) alone, no extra solves
spiky = GaussianBump((0.1, -0.2), 0.05, 50.0)
grid = GridDiscretization(33, 1.0, 2)
rows = truncation_bounds(spiky, (0.0, 5.0, 25.0, 50.0), p, grid,
                         bound.measured_A)
print("\ntruncation ladder for a bump of height 50:")
for r in rows:
    print(f"  cut at {r.level:5.1f}: ||f - f_m|| = {r.norm_gap:.4f}  "
          f"compliance drift <= {r.bound:.6f}")
print("the bound closes to zero once the cut passes the peak")
