# One bit of communication reproduces the singlet
#
# Alice and Bob share two uniform unit vectors.  Alice outputs -sgn(a.l1)
# and sends one bit; Bob outputs sgn(b.(l1 + c l2)).  The average product
# matches -a.b for every pair of directions.

import numpy as np

from finitecontext.protocols import direction_grid, estimate_correlation, singlet_born_correlation

for i, (a, b) in enumerate(direction_grid(6, seed=0)):
    est = estimate_correlation("toner-bacon", a, b, 200_000, seed=i)
    target = singlet_born_correlation(a, b)
    print(f"a.b={a @ b:+.3f}  E={est.mean:+.4f} +- {est.stderr:.4f}  born={target:+.4f}"
          f"  marginals {est.mean_a:+.4f} {est.mean_b:+.4f}")
