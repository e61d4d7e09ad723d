"""Bias against variance as the truncation rank of the pseudo-inverse grows.

Small ranks give a badly biased prior reconstruction; large ranks blow up
the sd of the indicator estimate.  The spline-restricted column stays sane.
"""

from ebayes.experiments import reproduce_table2

report = reproduce_table2()
print(f"{'r':>3} {'g_error':>8} {'E(theta)':>9} {'sd':>7} {'E(ind)':>7} {'sd':>12}")
for r, err, e1, cv1, sd1, e3, cv3, sd3 in report.rows:
    print(f"{r:>3} {err:8.3f} {e1:9.3f} {sd1:7.2f} {e3:7.3f} {sd3:12.1f}")
