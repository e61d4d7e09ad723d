"""Delta-method standard errors against a nonparametric bootstrap.

Refits the Poisson regression to 200 resamples of a synthetic screen and
compares the bootstrap sd of the Tweedie estimate with the formula.
"""

import numpy as np

from ebayes.experiments import analyze_zvalues, bootstrap_sd, synthetic_zvalues

z = synthetic_zvalues(seed=1, N=3000)
an = analyze_zvalues(z)
boot = bootstrap_sd(z, "tweedie", B=200, seed=1)
x = an.counts.x
for v in (-3, -1, 0, 1, 3):
    i = int(np.argmin(np.abs(x - v)))
    print(f"x={v:>2}  delta sd={an.tweedie.sd[i]:.4f}  bootstrap sd={boot.sd[i]:.4f}")
