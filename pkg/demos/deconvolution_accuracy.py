"""How accurate is an empirical Bayes posterior mean at x = 2.5?

Compares three routes to the same estimate on the bimodal test prior:
unrestricted f-modeling (truncated inverse of P), direct Bayes (known
marginal shape) and Poisson-regression f-modeling, and prints the sample
size each needs for a 10% coefficient of variation.
"""

from ebayes import sample_size_for_cv
from ebayes.experiments import reproduce_table1

report = reproduce_table1()
print(f"{'parameter':>10} {'E':>7} {'sd_f':>8} {'sd_d':>8} {'sd_x':>8}")
for label, E, sdf, sdd, sdx, cvf, cvd, cvx in report.rows:
    print(f"{label:>10} {E:7.3f} {sdf:8.2f} {sdd:8.2f} {sdx:8.2f}")

print("\nN needed for cv = 0.1")
for label, *_, cvf, cvd, cvx in report.rows:
    sizes = [sample_size_for_cv(cv, 0.1) for cv in (cvf, cvd, cvx)]
    print(f"{label:>10} " + " ".join(f"{n:>12,}" for n in sizes))
