"""Snap continuous intervals to the ordinal rating grid.

A continuous bound like 3.9 has no exact meaning on a 1..5 rating scale.
Expanding moves each endpoint outward to the next label, shrinking cuts the
label-free margins, and the lambda-nearest policy rounds an endpoint only
when a label is within lambda.  Expanding or nearest-rounding can only add
labels, so coverage never drops; shrinking removes regions containing no
labels, so coverage is unchanged.
"""

import confjudge as cj
from confjudge import GPA_THIRDS, LIKERT_5, AdjustmentPolicy, Interval, adjust

iv = Interval(2.2, 3.9)
print(f"continuous {iv.lo}..{iv.hi} on a Likert scale:")
for policy in (AdjustmentPolicy("expand"), AdjustmentPolicy("shrink"), AdjustmentPolicy.full(LIKERT_5)):
    out = adjust(iv, LIKERT_5, policy)
    print(f"  {policy.kind:<8} -> [{out.lo:.2f}, {out.hi:.2f}]")

# averaged three-annotator labels live on a thirds grid; 4.6 rounds to the
# nearest third (4.67), 4.9 to 5.0
iv = Interval(4.6, 4.9)
out = adjust(iv, GPA_THIRDS, AdjustmentPolicy("nearest", 1 / 6))
print(f"\nthirds grid: [{iv.lo}, {iv.hi}] -> [{out.lo:.2f}, {out.hi:.2f}] under full adjustment")

# partial adjustment only touches endpoints already close to a label
iv = Interval(3.2, 4.9)
out = adjust(iv, LIKERT_5, AdjustmentPolicy("nearest", 0.1))
print(f"lambda=0.1:  [{iv.lo}, {iv.hi}] -> [{out.lo:.2f}, {out.hi:.2f}]")

# the coverage effect, measured end to end over several seeded splits
ds, _ = cj.generate(cj.GeneratorSpec(seed=11, n=1000, noise=cj.Homoscedastic(0.6)))
seeds = list(range(1, 9))
print("\nr2ccp coverage over 8 splits:")
for policy in (None, AdjustmentPolicy("shrink"), AdjustmentPolicy.full(LIKERT_5)):
    report = cj.evaluate(ds, ["r2ccp"], seeds, alpha=0.1, policy=policy)
    agg = report.aggregates["r2ccp"]
    name = "continuous" if policy is None else policy.kind
    print(f"  {name:<10} width {agg['mean_width']:.3f}  coverage {agg['mean_coverage']:.2%}")
