"""The scalar g recursion tracks a moving fixed point and converges slowly.

g_n approaches theta_tilde, but the fixed points x*_n sit at distance of
order sqrt(eta_n) from the limit, so at N = 1e5 with eta_n = n^-0.7 the gap
is still around 1e-2.  The initial value is forgotten almost at once.
"""
import math

from amlab.recursions import fixed_point, g_series
from amlab.schedules import make_power_schedule

for gamma in (0.7, 1.0):
    sc = make_power_schedule(1, gamma)
    for tt in (0.5, 1.0, 2.0):
        a = g_series(tt, sc, 0.0, 1, 100_000)
        b = g_series(tt, sc, 1e6, 1, 100_000, with_fixed_points=False)
        print(f"gamma={gamma} theta_tilde={tt}: g_N={a.g[-1]:.5f} (from 1e6: {b.g[-1]:.5f}) "
              f"x*_N={a.fixed_points[-1]:.5f} |g_N - theta_tilde|={abs(a.g[-1] - tt):.2e} "
              f"sqrt(eta_N)={math.sqrt(sc.weight(100_000)):.2e}")

sc = make_power_schedule(1, 0.7)
for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
    print(f"n={n:>8}: x*_n - 0.5 = {fixed_point(n, 0.5, sc) - 0.5:.5f}")
