import math

import numpy as np
import pytest
from scipy import stats

from amlab.coupling import (CouplingError, CouplingSpec, EnvelopeError, coupling_test,
                            maximal_couple, maximal_couple_many, total_variation_1d)

N01 = stats.norm(0, 1).pdf
N11 = stats.norm(1, 1).pdf


def test_total_variation_examples():
    assert total_variation_1d(N01, N11) == pytest.approx(2 * stats.norm.cdf(0.5) - 1, abs=1e-9)
    assert total_variation_1d(N01, N01) == pytest.approx(0.0, abs=1e-12)
    u = stats.uniform(0, 1).pdf
    u2 = stats.uniform(0.5, 1).pdf
    assert total_variation_1d(u, u2, breakpoints=(0, 0.5, 1, 1.5)) == pytest.approx(0.5, abs=1e-9)


def test_non_normalized_density_rejected():
    with pytest.raises(CouplingError):
        CouplingSpec(lambda x: 2 * N01(x), N11)
    with pytest.raises(CouplingError):
        CouplingSpec(N01, N11, support=(1.0, -1.0))


def test_identical_densities_always_couple():
    spec = CouplingSpec(N01, N01)
    xs = np.random.default_rng(0).standard_normal(5000)
    y, coupled = maximal_couple_many(spec, xs, 1)
    assert coupled.all()
    np.testing.assert_array_equal(y, xs)


def test_single_draw_interface():
    spec = CouplingSpec(N01, N11)
    rng = np.random.default_rng(4)
    outs = [maximal_couple(spec, x, rng) for x in rng.standard_normal(2000)]
    assert all(isinstance(c, bool) for _, c in outs)
    freq = np.mean([c for _, c in outs])
    tv = total_variation_1d(spec, None)
    assert abs(freq - (1 - tv)) < 4 * math.sqrt(tv * (1 - tv) / 2000)


PAIRS = [
    ("normal shift", stats.norm(0, 1), stats.norm(1, 1), ()),
    ("normal scale", stats.norm(0, 1), stats.norm(0, 2), ()),
    ("laplace vs normal", stats.laplace(0, 1), stats.norm(0.5, 1.5), (0.0,)),
]


@pytest.mark.parametrize("name,p,q,bps", PAIRS, ids=[p[0] for p in PAIRS])
def test_coupling_frequency_and_marginal(name, p, q, bps):
    spec = CouplingSpec(p.pdf, q.pdf, breakpoints=bps)
    trials = 100_000
    rep = coupling_test(spec, lambda g, n: p.rvs(size=n, random_state=g), q.cdf, trials, rng=7)
    se = math.sqrt(rep.tv_oracle * (1 - rep.tv_oracle) / trials)
    assert abs(rep.coupled_freq - (1 - rep.tv_oracle)) <= 3 * se
    assert rep.ks_pvalue >= 0.01


def test_envelope_violation_is_reported():
    # a spike narrower than the envelope sub-grid is invisible to the envelope
    q = lambda x: 0.5 * N01(x) + 0.5 * stats.norm(0.3, 0.01).pdf(x)
    spec = CouplingSpec(N01, q, breakpoints=(0.25, 0.3, 0.35), grid=4)
    xs = np.random.default_rng(0).standard_normal(20_000)
    with pytest.raises(EnvelopeError) as info:
        maximal_couple_many(spec, xs, 0)
    assert info.value.diagnostics["grid"] == 4
