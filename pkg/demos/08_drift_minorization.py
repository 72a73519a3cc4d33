"""Drift and minorization constants of random-walk Metropolis on Laplace(0, 1).

V(x) = exp(|x|/2).  For proposal variance s the tail contraction 1 - P_sV/V
and the small-set constant delta_s on [-10, 10] are computed by quadrature.
At moderate s the tail contraction still grows with s and delta_s is tiny,
because the proposal cannot yet cross the small set.  The s^-1/2 decay of the
contraction only shows once the proposal is much wider than the set.
"""
import numpy as np

from amlab.analysis import drift_defect, drift_profile, loglog_slope

for s in (1.0, 10.0, 100.0):
    rep = drift_profile(s, M=10.0)
    print(f"s={s:>5g}: inf_tail={rep.inf_tail:.4f} lambda_s={rep.lambda_s:.4f} "
          f"b={rep.drift_b:.3g} delta_s={rep.delta_s:.3g} max P_sV/V={rep.max_ratio:.3f}")

big = np.array([1e3, 1e4, 1e5, 1e6])
defect = [drift_defect(10.0, s) for s in big]
print("defect at x=10 for s =", big.tolist(), "->", [f"{d:.4f}" for d in defect])
print(f"log-log slope over s in [1e4, 1e6]: {loglog_slope(big[1:], defect[1:]):.3f}")
