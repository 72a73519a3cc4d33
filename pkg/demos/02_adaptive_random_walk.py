"""Under a flat target the adapted covariance of AM grows without bound.

Every proposal is accepted, so the chain is a random walk driven by its own
covariance estimate.  Along any direction u, u'S_n u evolves multiplicatively
through the normalized displacements Z_n, and the smallest eigenvalue grows
path by path, not only in expectation.
"""
import warnings

import numpy as np

from amlab.chain import initial_state, run_adaptive_random_walk, z_sequence
from amlab.proposals import ProposalSpec
from amlab.rng import replica_seeds
from amlab.schedules import make_power_schedule

eta = make_power_schedule(1, 0.9)
init = initial_state(np.zeros(2))

for seed in replica_seeds(0, 5):
    tr = run_adaptive_random_walk(ProposalSpec(1.0), eta, init, 100_000,
                                  record_every=100_000, rng=seed)
    print(f"seed {seed:>20}: log10 lambda_min(S_N) = {np.log10(tr.lambda_min[-1]):7.1f}")

tr = run_adaptive_random_walk(ProposalSpec(1.0), eta, init, 5_000, rng=1)
zs = z_sequence(tr, [1.0, -1.0])
print(f"multiplicative identity along u: max relative error {zs.identity_error():.2e}")
print(f"log u'S_n u - log u'S_1 u = {np.log(zs.u_s_u[-1] / zs.u_s_u[0]):.3f}, "
      f"sum of log factors = {zs.log_products[-1]:.3f}")

# Refactorizing S_n from scratch loses positive definiteness in floating point once
# the eigenvalues spread apart; carrying the Cholesky factor by rank-one updates does not.
warnings.simplefilter("ignore", RuntimeWarning)
for mode in ("update", "refactor"):
    tr = run_adaptive_random_walk(ProposalSpec(0.5), make_power_schedule(1, 1),
                                  initial_state(np.zeros(2)), 200_000, record_every=200_000,
                                  rng=0, factorization=mode)
    status = "no collapse" if tr.collapse is None else f"collapsed at n={tr.collapse.n}"
    print(f"factorization={mode:8}: {status}")
