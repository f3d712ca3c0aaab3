"""Test whether label noise depends on the judge's logits.

Quantile-based interval methods earn their keep when the residual variance
changes across inputs.  The Breusch-Pagan test regresses squared OLS
residuals on the logits; the White test adds squares and cross products so
no functional form is assumed.  Small p-values reject constant variance.

Rating data drifts from the null almost by construction: labels snap to the
grid and clamp at the scale ends, which compresses variance for items near
the extremes even when the underlying noise is constant.  Explicitly
input-dependent noise pushes the statistics far beyond that baseline.
"""

import numpy as np

import confjudge as cj

print(f"{'labels':<24} {'BP LM':>9} {'p':>10} {'White LM':>9} {'p':>10}")

rng = np.random.default_rng(3)
Z = rng.normal(size=(800, 5))
flat = Z @ rng.normal(size=5) + rng.standard_normal(800)
bp = cj.bp_test(Z, flat)
white = cj.white_test(Z, flat)
print(f"{'true null (no grid)':<24} {bp.lm_stat:>9.2f} {bp.lm_p:>10.3g} "
      f"{white.lm_stat:>9.2f} {white.lm_p:>10.3g}")

for name, noise in (("constant sigma, gridded", cj.Homoscedastic(0.5)),
                    ("input-dependent sigma", cj.Heteroscedastic(0.8))):
    ds, _ = cj.generate(cj.GeneratorSpec(seed=3, n=800, noise=noise))
    bp = cj.bp_test(ds.logits, ds.labels)
    white = cj.white_test(ds.logits, ds.labels)
    print(f"{name:<24} {bp.lm_stat:>9.2f} {bp.lm_p:>10.3g} "
          f"{white.lm_stat:>9.2f} {white.lm_p:>10.3g}")
