"""Random-walk sums spread out: Q(X_1 + ... + X_n; 1) decays like n^-1/2.

The max-over-windows estimator is biased upwards when the best window holds
few samples, which pulls the fitted slope slightly above -0.5.
"""
from amlab.analysis import kr_scaling_check
from amlab.proposals import TemplateKind

# gaussian sums are drawn exactly; uniform-ball sums are simulated step by step
for kind, trials in (("gaussian", 100_000), ("uniform_ball", 20_000)):
    rep = kr_scaling_check(TemplateKind(kind), 1.0, [100, 1000, 10_000], trials=trials, rng=0)
    qs = ", ".join(f"{q:.5f}" for q in rep.q_hat)
    print(f"{kind:12}: Q = [{qs}]  fitted slope = {rep.slope:.4f}")
