"""Large-scale testing from z-values: false discovery rates and Tweedie.

Pass a file of z-values (one per line) as the first argument; otherwise a
synthetic screen of 6033 values is used.
"""

import sys

import numpy as np

from ebayes.experiments import analyze_zvalues, synthetic_zvalues
from ebayes.io import read_zvalues

z = read_zvalues(sys.argv[1]) if len(sys.argv) > 1 else synthetic_zvalues(seed=0)
an = analyze_zvalues(z)
x = an.counts.x

print(f"N={z.size}  pi0 (1/max ufdr)={an.pi0_max:.3f}  pi0 (g-model atom)={an.pi0_g:.3f}")
print(f"{'x':>4} {'ufdr':>7} {'sd':>6} {'fdr_g':>7} {'tweedie':>8}")
for v in range(-4, 5):
    i = int(np.argmin(np.abs(x - v)))
    print(f"{v:>4} {an.ufdr.values[i]:7.3f} {an.ufdr.sd[i]:6.3f} "
          f"{an.fdr_g.values[i]:7.3f} {an.tweedie.estimate[i]:8.3f}")
print(f"Tweedie estimate at the largest z ({z.max():.2f}): {an.tweedie.at(z.max()):.2f}")
