"""The adaptive Metropolis chain: Metropolis step, mean/covariance adaptation,
the uniform-target fast path and the normalized displacement process.

State at index ``n`` is ``(X_n, M_n, S_n)``.  One transition proposes from
``S_n``, accepts or rejects, and then adapts with weight ``eta_{n+1}``:

    M_{n+1} = (1 - eta) M_n + eta X_{n+1}
    S_{n+1} = (1 - eta) S_n + eta (X_{n+1} - M_n)(X_{n+1} - M_n)^T

Adaptation runs on every step, rejected or not.

Randomness in :func:`run_am` is consumed in blocks of ``block_size`` steps.
Per block, in this order: template draws ``(K, d)``; if ``beta > 0`` the
branch uniforms ``(K,)`` and fixed increments ``(K, d)``; if the target is
not the improper uniform, the acceptance uniforms ``(K,)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .proposals import (NotPositiveDefiniteError, ProposalSpec, cholesky_factor,
                        propose_mixture, sample_fixed, sample_templates)
from .rng import as_generator
from .schedules import WeightSchedule
from .targets import (InvalidChainStateError, TargetDensity, improper_uniform,
                      log_density)

__all__ = [
    "InsufficientResolutionError",
    "AmState",
    "CollapseDiagnostic",
    "ChainTrace",
    "ZSeries",
    "initial_state",
    "metropolis_step",
    "am_update",
    "run_am",
    "run_adaptive_random_walk",
    "z_sequence",
]

BLOCK_SIZE = 1 << 16


class InsufficientResolutionError(ValueError):
    """The trace was thinned but consecutive states are required."""


@dataclass
class AmState:
    n: int
    x: np.ndarray
    m: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        self.m = np.atleast_1d(np.asarray(self.m, dtype=float)).copy()
        self.s = np.atleast_2d(np.asarray(self.s, dtype=float)).copy()
        d = self.x.size
        if self.m.shape != (d,) or self.s.shape != (d, d):
            raise ValueError("dimensions of x, m and s disagree")

    @property
    def dim(self) -> int:
        return self.x.size


def initial_state(x1, s1=None, m1=None) -> AmState:
    """State at ``n = 1``; ``m1`` defaults to ``x1`` and ``s1`` to the identity."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    if s1 is None:
        s1 = np.eye(x1.size)
    if m1 is None:
        m1 = x1
    return AmState(1, x1, m1, s1)


@dataclass
class CollapseDiagnostic:
    """Covariance that failed factorization, and its index ``n``."""

    n: int
    s: np.ndarray

    def to_dict(self) -> dict:
        return {"n": self.n, "s": self.s.tolist()}


@dataclass
class ChainTrace:
    """Recorded history of one chain.

    Dense arrays (row ``i`` is index ``n = i + 1``): ``x``, ``m``, ``s_diag``,
    ``lambda_min``.  Per-transition arrays (entry ``k`` is the move from
    ``n = k + 1`` to ``n = k + 2``): ``accepted``, ``used_fixed``, ``eta``.
    Full covariance matrices are kept only at ``record_n``.
    """

    initial: AmState
    x: np.ndarray
    m: np.ndarray
    s_diag: np.ndarray
    lambda_min: np.ndarray
    accepted: np.ndarray
    used_fixed: np.ndarray
    eta: np.ndarray
    record_every: int
    record_n: np.ndarray
    s_records: np.ndarray
    seed: Optional[int] = None
    config_digest: str = ""
    collapse: Optional[CollapseDiagnostic] = None
    target: Optional[TargetDensity] = field(default=None, repr=False)
    factorization: str = "update"

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def n_steps(self) -> int:
        """Number of completed transitions."""
        return self.accepted.size

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if self.accepted.size else float("nan")

    @property
    def final_state(self) -> AmState:
        return self.state_at(self.n_steps + 1)

    @property
    def states(self) -> list:
        """Recorded post-step states (the initial state is :attr:`initial`)."""
        return [self.state_at(int(n)) for n in self.record_n if n > 1]

    def state_at(self, n: int) -> AmState:
        pos = np.searchsorted(self.record_n, n)
        if pos >= self.record_n.size or self.record_n[pos] != n:
            raise InsufficientResolutionError(f"full state at n={n} was not recorded")
        return AmState(n, self.x[n - 1], self.m[n - 1], self.s_records[pos])

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        """Write recorded states as CSV (upper triangle of ``S`` in row-major order).

        ``comment`` is written first as a ``#`` line (provenance).
        """
        d = self.dim
        iu = np.triu_indices(d)
        header = (["n", "accepted", "used_fixed"] + [f"x_{i + 1}" for i in range(d)]
                  + [f"m_{i + 1}" for i in range(d)]
                  + [f"s_{i + 1}{j + 1}" for i, j in zip(*iu)] + ["lambda_min"])
        fmt = lambda v: format(float(v), ".17g")
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write(",".join(header) + "\n")
            for pos, n in enumerate(self.record_n):
                n = int(n)
                if n == 1:
                    flags = ["", ""]
                else:
                    flags = [str(int(self.accepted[n - 2])), str(int(self.used_fixed[n - 2]))]
                row = ([str(n)] + flags + [fmt(v) for v in self.x[n - 1]]
                       + [fmt(v) for v in self.m[n - 1]]
                       + [fmt(v) for v in self.s_records[pos][iu]]
                       + [fmt(self.lambda_min[n - 1])])
                fh.write(",".join(row) + "\n")


def metropolis_step(state: AmState, spec: ProposalSpec, target: TargetDensity, rng) -> tuple:
    """One Metropolis transition from ``state``: ``(x_next, accepted, used_fixed)``."""
    if target.dim != state.dim:
        raise ValueError("target dimension does not match the state")
    lx = log_density(target, state.x)
    if lx == -math.inf:
        raise InvalidChainStateError("current state has zero target density")
    factor = cholesky_factor(state.s)
    y, used_fixed = propose_mixture(state.x, factor, spec, rng)
    if target.is_uniform:
        return y, True, used_fixed
    delta = log_density(target, y) - lx
    u = rng.random()
    accepted = delta >= 0 or (u > 0 and math.log(u) < delta)
    return (y if accepted else state.x.copy()), bool(accepted), used_fixed


def am_update(state: AmState, x_next, eta_next: float) -> AmState:
    """Mean and covariance recursion with weight ``eta_next``; uses the old mean in ``S``."""
    if not 0.0 < eta_next < 1.0:
        raise ValueError(f"adaptation weight must lie in (0, 1), got {eta_next!r}")
    x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
    dev = x_next - state.m
    m = (1.0 - eta_next) * state.m + eta_next * x_next
    s = (1.0 - eta_next) * state.s + eta_next * np.outer(dev, dev)
    return AmState(state.n + 1, x_next, m, s)


def _draw_block(spec, d, K, rng, need_accept):
    W = sample_templates(spec.template, d, K, rng)
    if spec.beta > 0:
        ub = rng.random(K)
        V = sample_fixed(spec.q_fix, d, K, rng)
    else:
        ub = np.ones(0)
        V = np.zeros((0, d))
    if need_accept:
        with np.errstate(divide="ignore"):
            lu = np.log(rng.random(K))
    else:
        lu = np.zeros(0)
    return W, ub, V, lu


def _python_block(target, theta, beta, update_factor, x, m, s, chol, W, ub, V, lu, eta,
                  xs, ms, sdiag, lmin, accepted, used_fixed, rec_every, rec_offset, rec_s, rec_pos):
    """Uncompiled twin of ``_kernels.run_block`` for custom log-densities."""
    lx = log_density(target, x)
    if lx == -math.inf:
        raise InvalidChainStateError("current state has zero target density")
    for k in range(W.shape[0]):
        if not update_factor and not _kernels.cholesky_lower(s, chol):
            return k, True
        fixed = beta > 0 and ub[k] < beta
        y = x + V[k] if fixed else x + theta * (chol @ W[k])
        ly = log_density(target, y)
        delta = ly - lx
        ok = not (delta < 0 and not lu[k] < delta)
        if ok:
            x[:] = y
            lx = ly
        e = eta[k]
        dev = x - m
        if update_factor:
            valid = _kernels.chol_rank1_update(chol, 1.0 - e, math.sqrt(e) * dev)
            _kernels.factor_product(chol, s)
            if not valid:
                return k, True
        else:
            s[:] = (1.0 - e) * s + e * np.outer(dev, dev)
        m[:] = (1.0 - e) * m + e * x
        accepted[k] = ok
        used_fixed[k] = fixed
        xs[k] = x
        ms[k] = m
        sdiag[k] = np.diag(s)
        lmin[k] = _kernels.factor_lambda_min(chol) if update_factor else _kernels.lambda_min(s)
        if (rec_offset + k + 1) % rec_every == 0:
            rec_s[rec_pos[0]] = s
            rec_pos[0] += 1
    return W.shape[0], False


def run_am(target: TargetDensity, spec: ProposalSpec, schedule: WeightSchedule, init: AmState,
           n_steps: int, record_every: int = 1, rng=None, *, factorization: str = "update",
           block_size: int = BLOCK_SIZE, config_digest: str = "") -> ChainTrace:
    """Run ``n_steps`` AM transitions from ``init``.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.

    ``factorization="update"`` carries the Cholesky factor of ``S_n`` forward
    by rank-one updates, which keeps it positive definite by construction and
    keeps small eigenvalues accurate when ``S_n`` is badly conditioned.
    ``factorization="refactor"`` runs the matrix recursion and factorizes
    ``S_n`` from scratch every step, so loss of positive definiteness in
    floating point is detected exactly.  In either mode a failed factor stops
    the run; the returned trace is truncated and carries a
    :class:`CollapseDiagnostic`.
    """
    if factorization not in ("update", "refactor"):
        raise ValueError("factorization must be 'update' or 'refactor'")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    if target.dim != init.dim:
        raise ValueError("target dimension does not match the initial state")
    gen, seed = as_generator(rng)
    d = init.dim
    x, m, s = init.x.copy(), init.m.copy(), init.s.copy()
    chol = np.zeros((d, d))
    if not _kernels.cholesky_lower(s, chol):
        raise NotPositiveDefiniteError("initial covariance is not positive definite", s.copy())
    if not target.is_uniform and log_density(target, x) == -math.inf:
        raise InvalidChainStateError("initial state has zero target density")

    xs = np.empty((n_steps + 1, d))
    ms = np.empty((n_steps + 1, d))
    sdiag = np.empty((n_steps + 1, d))
    lmin = np.empty(n_steps + 1)
    accepted = np.zeros(n_steps, dtype=np.bool_)
    used_fixed = np.zeros(n_steps, dtype=np.bool_)
    xs[0], ms[0], sdiag[0] = x, m, np.diag(s)
    lmin[0] = _kernels.factor_lambda_min(chol) if factorization == "update" else _kernels.lambda_min(s)
    rec_s = np.empty((n_steps // record_every + 2, d, d))
    rec_s[0] = s
    rec_pos = np.array([1], dtype=np.int64)
    eta_all = schedule.weights(2, n_steps + 1)
    if np.any(~((eta_all > 0) & (eta_all < 1))):
        raise ValueError("adaptation weights must lie in (0, 1)")

    compiled = target.kind != "custom"
    update = factorization == "update"
    p_scalar, p_vec, p_mat = target.kernel_params()
    collapse = None
    done = 0
    while done < n_steps:
        K = min(block_size, n_steps - done)
        W, ub, V, lu = _draw_block(spec, d, K, gen, not target.is_uniform)
        sl = slice(done + 1, done + 1 + K)
        args = (x, m, s, chol, W, ub, V, lu, eta_all[done:done + K],
                xs[sl], ms[sl], sdiag[sl], lmin[sl], accepted[done:done + K],
                used_fixed[done:done + K], record_every, done, rec_s, rec_pos)
        if compiled:
            k, failed = _kernels.run_block(target.code, p_scalar, p_vec, p_mat,
                                           float(spec.theta), float(spec.beta), update, *args)
        else:
            k, failed = _python_block(target, float(spec.theta), float(spec.beta), update, *args)
        done += k
        if failed:
            collapse = CollapseDiagnostic(done + 1, s.copy())
            warnings.warn(f"covariance lost positive definiteness at n={done + 1}", RuntimeWarning)
            break

    n_rec = int(rec_pos[0])
    record_n = [1] + [r * record_every + 1 for r in range(1, n_rec)]
    if record_n[-1] != done + 1:
        rec_s[n_rec] = s
        record_n.append(done + 1)
        n_rec += 1
    return ChainTrace(
        initial=AmState(init.n, init.x, init.m, init.s),
        x=xs[:done + 1], m=ms[:done + 1], s_diag=sdiag[:done + 1], lambda_min=lmin[:done + 1],
        accepted=accepted[:done], used_fixed=used_fixed[:done], eta=eta_all[:done],
        record_every=record_every, record_n=np.array(record_n, dtype=np.int64),
        s_records=rec_s[:n_rec].copy(), seed=seed, config_digest=config_digest,
        collapse=collapse, target=target, factorization=factorization)


def run_adaptive_random_walk(spec: ProposalSpec, schedule: WeightSchedule, init: AmState,
                             n_steps: int, record_every: int = 1, rng=None, **kwargs) -> ChainTrace:
    """The chain under an improper uniform target: every proposal is accepted."""
    return run_am(improper_uniform(init.dim), spec, schedule, init, n_steps, record_every,
                  rng, **kwargs)


@dataclass
class ZSeries:
    """Normalized displacements ``Z_{n+1}`` along ``u`` for ``n = 1, ..., N``.

    ``factors[k] = 1 + eta_{n+1} (Z_{n+1}^2 - 1)`` and ``log_products`` is the
    running sum of their logarithms.  ``u_s_u[k]`` is ``u^T S_n u`` with
    ``n = k + 1``.
    """

    u: np.ndarray
    z: np.ndarray
    factors: np.ndarray
    log_products: np.ndarray
    u_s_u: np.ndarray

    def identity_error(self) -> float:
        """Largest relative error of ``u^T S_{n+1} u = factor * u^T S_n u``."""
        pred = self.factors * self.u_s_u[:-1]
        return float(np.max(np.abs(self.u_s_u[1:] - pred) / np.abs(self.u_s_u[1:])))


def z_sequence(trace: ChainTrace, u) -> ZSeries:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    norm = np.linalg.norm(u)
    if norm == 0 or u.size != trace.dim:
        raise ValueError("u must be a non-zero vector of the chain's dimension")
    u = u / norm
    N = trace.n_steps
    if trace.record_n.size != N + 1:
        raise InsufficientResolutionError("z_sequence needs a trace recorded with record_every=1")
    usu = np.einsum("i,kij,j->k", u, trace.s_records, u)
    disp = (trace.x[1:] - trace.m[:-1]) @ u
    z = disp / np.sqrt(usu[:-1])
    factors = 1.0 + trace.eta * (z * z - 1.0)
    return ZSeries(u, z, factors, np.cumsum(np.log(factors)), usu)
