import math
import warnings

import numpy as np
import pytest
from scipy import stats

from amlab.chain import (AmState, InsufficientResolutionError, am_update, initial_state,
                         metropolis_step, run_adaptive_random_walk, run_am, z_sequence)
from amlab.proposals import FixedIncrement, ProposalSpec, TemplateKind
from amlab.rng import replica_seeds
from amlab.recursions import expectation_series
from amlab.schedules import make_power_schedule
from amlab.targets import custom, gaussian, improper_uniform, laplace

ONE_OVER_N = make_power_schedule(1, 1)


def naive_am(target_logpdf, theta, beta, sigma0, eta, x1, s1, n_steps, seed, uniform=False):
    """Independent replay: same draw order, plain numpy, full refactorization."""
    rng = np.random.default_rng(seed)
    d = x1.size
    W = rng.standard_normal((n_steps, d))
    if beta > 0:
        ub = rng.random(n_steps)
        V = sigma0 * rng.standard_normal((n_steps, d))
    if not uniform:
        lu = np.log(rng.random(n_steps))
    x, m, s = x1.copy(), x1.copy(), s1.copy()
    xs, ss, acc = [x.copy()], [s.copy()], []
    for k in range(n_steps):
        L = np.linalg.cholesky(s)
        y = x + V[k] if beta > 0 and ub[k] < beta else x + theta * L @ W[k]
        ok = uniform or lu[k] < target_logpdf(y) - target_logpdf(x)
        if ok:
            x = y
        e = eta[k]
        dev = x - m
        s = (1 - e) * s + e * np.outer(dev, dev)
        m = (1 - e) * m + e * x
        xs.append(x.copy())
        ss.append(s.copy())
        acc.append(ok)
    return np.array(xs), np.array(ss), np.array(acc)


@pytest.mark.parametrize("factorization", ["update", "refactor"])
def test_engine_matches_naive_replay_laplace(factorization):
    d, n = 2, 3000
    target = laplace(dim=d)
    spec = ProposalSpec(1.2, beta=0.2, q_fix=FixedIncrement("gaussian", 1.5))
    init = initial_state(np.array([0.5, -0.5]), np.array([[1.0, 0.2], [0.2, 0.5]]))
    tr = run_am(target, spec, ONE_OVER_N, init, n, rng=123, factorization=factorization)
    xs, ss, acc = naive_am(lambda v: -np.abs(v).sum(), 1.2, 0.2, 1.5,
                           ONE_OVER_N.weights(2, n + 1), init.x, init.s, n, 123)
    np.testing.assert_array_equal(tr.accepted, acc)
    np.testing.assert_allclose(tr.x, xs, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(tr.s_records, ss, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(tr.lambda_min, np.linalg.eigvalsh(ss)[:, 0], rtol=1e-8)


def test_engine_matches_naive_replay_uniform():
    # short and low-dimensional: plain refactorization breaks down on longer uniform runs
    n = 500
    spec = ProposalSpec(0.8)
    init = initial_state(np.zeros(2))
    tr = run_adaptive_random_walk(spec, make_power_schedule(1, 0.8), init, n, rng=9)
    xs, ss, _ = naive_am(None, 0.8, 0.0, 1.0, make_power_schedule(1, 0.8).weights(2, n + 1),
                         init.x, init.s, n, 9, uniform=True)
    # uniform runs become ill-conditioned quickly; factor updates and refactorization
    # then round differently
    np.testing.assert_allclose(tr.x, xs, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(tr.s_records, ss, rtol=1e-6)
    assert tr.accepted.all()


def test_custom_target_path_matches_compiled():
    spec = ProposalSpec(2.0)
    init = initial_state(np.zeros(1))
    a = run_am(laplace(), spec, ONE_OVER_N, init, 2000, rng=4)
    b = run_am(custom(lambda v: -abs(v[0]) - math.log(2.0), 1), spec, ONE_OVER_N, init, 2000, rng=4)
    np.testing.assert_array_equal(a.accepted, b.accepted)
    np.testing.assert_allclose(a.x, b.x, rtol=1e-12)
    np.testing.assert_allclose(a.s_records, b.s_records, rtol=1e-12)


def test_multi_block_runs_reproduce():
    # block size is part of the reproducibility key (draws are taken per block)
    spec = ProposalSpec(2.4)
    init = initial_state(np.zeros(2))
    g = gaussian(np.zeros(2), np.eye(2))
    a = run_am(g, spec, ONE_OVER_N, init, 1000, rng=1, block_size=64)
    b = run_am(g, spec, ONE_OVER_N, init, 1000, rng=1, block_size=64)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.s_records, b.s_records)
    assert a.n_steps == 1000 and a.collapse is None


def test_fast_path_equivalence_bitwise():
    spec = ProposalSpec(1.0)
    init = initial_state(np.zeros(2))
    a = run_adaptive_random_walk(spec, make_power_schedule(1, 0.9), init, 5000, rng=77)
    b = run_am(improper_uniform(2), spec, make_power_schedule(1, 0.9), init, 5000, rng=77)
    for name in ("x", "m", "s_diag", "lambda_min", "accepted", "s_records"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_rejections_freeze_state_but_adaptation_continues():
    tr = run_am(laplace(), ProposalSpec(8.0), ONE_OVER_N, initial_state([0.0]), 5000, rng=3)
    rej = np.flatnonzero(~tr.accepted)
    assert rej.size > 100
    assert np.array_equal(tr.x[rej + 1], tr.x[rej])
    assert np.any(tr.m[rej + 1] != tr.m[rej])
    k = rej[5]
    e = tr.eta[k]
    s_prev = tr.s_records[k]
    dev = tr.x[k + 1] - tr.m[k]
    np.testing.assert_allclose(tr.s_records[k + 1], (1 - e) * s_prev + e * np.outer(dev, dev))


def test_am_update_uses_old_mean():
    st = AmState(5, np.array([1.0]), np.array([0.0]), np.array([[2.0]]))
    nxt = am_update(st, [3.0], 0.25)
    assert nxt.n == 6
    np.testing.assert_allclose(nxt.m, [0.75])
    np.testing.assert_allclose(nxt.s, [[0.75 * 2.0 + 0.25 * 9.0]])
    with pytest.raises(ValueError):
        am_update(st, [3.0], 1.0)


def test_metropolis_step_single():
    st = initial_state([0.0])
    x, acc, fixed = metropolis_step(st, ProposalSpec(1.0), improper_uniform(1), np.random.default_rng(0))
    assert acc and not fixed
    np.testing.assert_allclose(x, np.random.default_rng(0).standard_normal((1, 1))[0])


def test_z_identity_both_modes():
    rng = np.random.default_rng(0)
    for d, fact in ((1, "update"), (2, "update"), (3, "refactor")):
        tr = run_am(laplace(dim=d), ProposalSpec(2.4 / math.sqrt(d)), ONE_OVER_N,
                    initial_state(np.zeros(d)), 10_000, rng=d, factorization=fact)
        arw = run_adaptive_random_walk(ProposalSpec(0.5), ONE_OVER_N, initial_state(np.zeros(d)),
                                       10_000, rng=d, factorization=fact)
        for _ in range(5):
            u = rng.standard_normal(d)
            assert z_sequence(tr, u).identity_error() <= 1e-10
            assert z_sequence(arw, u).identity_error() <= 1e-10


def test_z_equals_one_for_unit_displacement():
    s = np.array([[4.0]])
    st = AmState(1, np.array([0.0]), np.array([0.0]), s)
    nxt = am_update(st, [2.0], 0.5)
    from amlab.chain import ChainTrace
    tr = ChainTrace(initial=st, x=np.array([[0.0], [2.0]]), m=np.array([[0.0], nxt.m]),
                    s_diag=np.array([[4.0], np.diag(nxt.s)]), lambda_min=np.array([4.0, nxt.s[0, 0]]),
                    accepted=np.array([True]), used_fixed=np.array([False]), eta=np.array([0.5]),
                    record_every=1, record_n=np.array([1, 2]), s_records=np.array([s, nxt.s]))
    zs = z_sequence(tr, [1.0])
    assert zs.z[0] == 1.0
    assert zs.factors[0] == 1.0


def test_z_increments_follow_template():
    theta = 0.7
    tr = run_adaptive_random_walk(ProposalSpec(theta), make_power_schedule(1, 0.9),
                                  initial_state([0.0]), 20_000, rng=5)
    zs = z_sequence(tr, [1.0])
    eta = tr.eta  # eta_{n+1} for the step from n
    z = zs.z
    # U_n Z_n with U_n = (1 - eta_n)(1 + eta_n (Z_n^2 - 1))^{-1/2}
    u = (1 - eta[:-1]) / np.sqrt(1 + eta[:-1] * (z[:-1] ** 2 - 1))
    incr = z[1:] - u * z[:-1]
    assert stats.kstest(incr / theta, "norm").pvalue > 0.01


def test_thinned_trace_rejected():
    tr = run_adaptive_random_walk(ProposalSpec(1.0), ONE_OVER_N, initial_state([0.0]), 100,
                                  record_every=10, rng=0)
    with pytest.raises(InsufficientResolutionError):
        z_sequence(tr, [1.0])
    with pytest.raises(InsufficientResolutionError):
        tr.state_at(5)
    assert tr.state_at(11).n == 11
    assert tr.final_state.n == 101


def test_pd_preserved_small_grid():
    for d in (1, 3, 5):
        for target, theta in ((laplace(dim=d), 2.4 / math.sqrt(d)),
                              (gaussian(np.zeros(d), np.eye(d)), 2.4 / math.sqrt(d)),
                              (improper_uniform(d), 0.5)):
            for seed in range(3):
                tr = run_am(target, ProposalSpec(theta), ONE_OVER_N, initial_state(np.zeros(d)),
                            20_000, record_every=20_000, rng=seed)
                assert tr.collapse is None
                assert np.all(tr.lambda_min > 0)


def test_refactorization_detects_collapse():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tr = run_adaptive_random_walk(ProposalSpec(1.0), ONE_OVER_N, initial_state(np.zeros(3)),
                                      100_000, record_every=1000, rng=0, factorization="refactor")
    assert tr.collapse is not None
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    assert tr.n_steps + 1 == tr.collapse.n
    assert tr.x.shape[0] == tr.collapse.n
    assert tr.collapse.to_dict()["n"] == tr.collapse.n


def test_initial_decrease_phase():
    tr = run_adaptive_random_walk(ProposalSpec(0.01), ONE_OVER_N, initial_state([0.0]), 20_000,
                                  record_every=20_000, rng=1)
    assert tr.s_diag[10_000 - 1, 0] < 1.0


def test_monte_carlo_mean_matches_expectation_short_horizon():
    # at n = 100 the spread of log S_n is about 1.7, so 1e4 replicas estimate E[S_n] reliably
    sc = make_power_schedule(1, 0.9)
    spec = ProposalSpec(0.5)
    init = initial_state([0.0])
    vals = np.array([run_adaptive_random_walk(spec, sc, init, 99, record_every=99, rng=s).s_diag[-1, 0]
                     for s in replica_seeds(0, 10_000)])
    b = expectation_series(0.5, sc, N=100).b(100)
    assert abs(vals.mean() - b) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


@pytest.mark.xfail(strict=True, reason="S_n is close to log-normal with log-spread near 3.9 at "
                   "n=1e3, so the mean of 1e4 replicas is dominated by rare paths and falls "
                   "far below b_n; see decisions ledger")
def test_monte_carlo_mean_matches_expectation_at_1e3():
    sc = make_power_schedule(1, 0.9)
    spec = ProposalSpec(0.5)
    init = initial_state([0.0])
    vals = np.array([run_adaptive_random_walk(spec, sc, init, 999, record_every=999, rng=s).s_diag[-1, 0]
                     for s in replica_seeds(0, 10_000)])
    b = expectation_series(0.5, sc, N=1000).b(1000)
    assert abs(vals.mean() - b) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_trace_csv(tmp_path):
    tr = run_am(laplace(dim=2), ProposalSpec(1.0), ONE_OVER_N, initial_state(np.zeros(2)), 50,
                record_every=10, rng=2)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    tr.write_csv(p1, comment="config_digest=abc seed=2")
    run_am(laplace(dim=2), ProposalSpec(1.0), ONE_OVER_N, initial_state(np.zeros(2)), 50,
           record_every=10, rng=2).write_csv(p2, comment="config_digest=abc seed=2")
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0].startswith("# config_digest=abc")
    assert lines[1] == "n,accepted,used_fixed,x_1,x_2,m_1,m_2,s_11,s_12,s_22,lambda_min"
    assert [int(r.split(",")[0]) for r in lines[2:]] == [1, 11, 21, 31, 41, 51]
    row = lines[3].split(",")
    assert float(row[3]) == tr.x[10, 0]
    assert float(row[-1]) == tr.lambda_min[10]
