"""On a proper target AM behaves: a strong law of large numbers on Laplace(0, 1).

The adapted mean and variance settle at 0 and 2, and ergodic averages of
functions growing as fast as exp(0.4|x|) converge to their integrals.
"""
import numpy as np

from amlab.analysis import ergodic_average
from amlab.chain import initial_state, run_am
from amlab.proposals import ProposalSpec
from amlab.rng import replica_seeds
from amlab.schedules import make_power_schedule
from amlab.targets import laplace

for seed in replica_seeds(3, 4):
    tr = run_am(laplace(), ProposalSpec(2.4), make_power_schedule(1, 1), initial_state([0.0]),
                1_000_000, record_every=1_000_000, rng=seed)
    parts = [f"M_N={tr.m[-1, 0]:+.3f}", f"S_N={tr.s_diag[-1, 0]:.3f}",
             f"acc={tr.acceptance_rate:.2f}"]
    for f in ("square", "exp_abs:0.4"):
        rep = ergodic_average(tr, f)
        parts.append(f"{f}: {rep.running_means[-1]:.3f} vs {rep.reference:.3f}")
    print("  ".join(parts))
