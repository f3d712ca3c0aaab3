"""Coverage stability as the calibration set grows.

Recalibrating on random fractions of the calibration pool shows the usual
picture: the mean coverage stays near the target, while its spread across
seeds shrinks as more calibration data becomes available.
"""

import confjudge as cj

ds, _ = cj.generate(cj.GeneratorSpec(seed=13, n=1600, noise=cj.Homoscedastic(0.5)))
rows = cj.calibration_sweep(
    ds, "split_abs", seeds=range(1, 21), fractions=[0.25, 0.5, 0.75, 1.0],
    alpha=0.1, point_predictor="ridge",
)

print(f"{'fraction':>8} {'mean coverage':>14} {'std':>7}")
for r in rows:
    print(f"{r.fraction:>8.2f} {r.mean_coverage:>14.4f} {r.std_coverage:>7.4f}")
