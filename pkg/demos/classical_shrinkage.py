"""Two classical empirical Bayes estimators.

Robbins' formula for Poisson counts (gamma prior, so the answer is known)
and James-Stein shrinkage of normal means.
"""

import numpy as np
from scipy.stats import nbinom

from ebayes import james_stein, robbins_estimate

a, b = 2.0, 1.0
counts = np.random.default_rng(5).negative_binomial(a, b / (b + 1), size=20_000)
fhat = np.bincount(counts, minlength=40) / counts.size
exact = nbinom.pmf(np.arange(40), a, b / (b + 1))
print(" x  robbins(empirical)  robbins(exact f)  (a+x)/(b+1)")
for x in range(8):
    print(f"{x:>2}  {robbins_estimate(fhat, x):18.3f}  {robbins_estimate(exact, x):16.3f}"
          f"  {(a + x) / (b + 1):11.3f}")

rng = np.random.default_rng(6)
mu = rng.normal(0, 1, 50)
X = mu + rng.standard_normal(50)
js = james_stein(X)
print(f"\nsquared error: raw {np.sum((X - mu) ** 2):.1f}, James-Stein {np.sum((js - mu) ** 2):.1f}")
