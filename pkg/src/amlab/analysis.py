"""Verification toolkit: concentration functions, drift and minorization
quadrature for the one-dimensional Laplace target, ergodic averages and
eigenvalue-floor statistics.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .chain import ChainTrace
from .proposals import TemplateKind, sample_templates
from .rng import as_generator
from .targets import TargetDensity

__all__ = [
    "ConcentrationEstimate",
    "KrScalingReport",
    "DriftReport",
    "SllnReport",
    "EigenFloorReport",
    "QuadratureError",
    "concentration_function",
    "normal_concentration",
    "kr_scaling_check",
    "lyapunov",
    "drift_defect",
    "drift_defect_limit",
    "drift_decomposition",
    "drift_profile",
    "minorization_estimate",
    "register_functional",
    "resolve_functional",
    "functional_reference",
    "ergodic_average",
    "eigen_floor",
    "loglog_slope",
]


class QuadratureError(RuntimeError):
    """A quadrature error estimate exceeded the requested tolerance."""


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# ---------------------------------------------------------------------------
# concentration function

@dataclass
class ConcentrationEstimate:
    lam: float
    q_hat: float
    n_samples: int
    window_start: float


def concentration_function(samples, lam: float) -> ConcentrationEstimate:
    """Empirical ``Q(X; lam) = sup_x P(X in [x, x + lam])``.

    The supremum over windows is attained with the left end at a sample, so
    for each sample the count in ``[s_i, s_i + lam]`` is read off a sorted
    copy with ``searchsorted``.
    """
    if not lam > 0:
        raise ValueError("window width lam must be positive")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    if np.any(x[1:] < x[:-1]):
        x = np.sort(x)
    counts = np.searchsorted(x, x + lam, side="right") - np.arange(x.size)
    i = int(np.argmax(counts))
    return ConcentrationEstimate(float(lam), counts[i] / x.size, x.size, float(x[i]))


def normal_concentration(sigma: float, lam: float) -> float:
    """Exact ``Q(N(0, sigma^2); lam) = 2 Phi(lam / (2 sigma)) - 1``."""
    return float(special.erf(lam / (2.0 * sigma * math.sqrt(2.0))))


@dataclass
class KrScalingReport:
    step_counts: list
    q_hat: list
    slope: float
    tolerance: float
    low_count_warning: bool

    @property
    def passed(self) -> bool:
        return abs(self.slope + 0.5) <= self.tolerance

    def to_dict(self) -> dict:
        return {"step_counts": self.step_counts, "q_hat": self.q_hat, "slope": self.slope,
                "tolerance": self.tolerance, "low_count_warning": self.low_count_warning,
                "passed": self.passed}


def _walk_sums(template: TemplateKind, theta: float, n: int, trials: int, rng,
               max_chunk: int = 4_000_000) -> np.ndarray:
    if template.kind == "gaussian":
        # a sum of n standard normals is exactly sqrt(n) times one
        return theta * math.sqrt(n) * rng.standard_normal(trials)
    total = np.zeros(trials)
    per = max(1, max_chunk // trials)
    done = 0
    while done < n:
        k = min(per, n - done)
        total += sample_templates(template, 1, k * trials, rng).reshape(k, trials).sum(axis=0)
        done += k
    return theta * total


def kr_scaling_check(template: TemplateKind, theta: float, step_counts: Sequence[int],
                     L: float = 1.0, trials: int = 100_000, rng=None,
                     tolerance: float = 0.05, min_window_count: int = 100) -> KrScalingReport:
    """Fit the decay exponent of ``Q(X_1 + ... + X_n; L)`` in ``n``.

    Steps are one-dimensional template draws scaled by ``theta``.  The fitted
    log-log slope should be close to ``-1/2``.  ``low_count_warning`` is set
    when the most concentrated window at some ``n`` holds fewer than
    ``min_window_count`` samples, where the max-over-windows estimator is
    noticeably biased upwards.
    """
    counts = sorted(int(n) for n in step_counts)
    if len(counts) < 3 or counts[0] < 1:
        raise ValueError("need at least three positive step counts")
    if counts[-1] < 100 * counts[0]:
        raise ValueError("step counts must span at least two decades")
    gen, _ = as_generator(rng)
    q = []
    low = False
    for n in counts:
        est = concentration_function(np.sort(_walk_sums(template, theta, n, trials, gen)), L)
        q.append(float(est.q_hat))
        low |= est.q_hat * trials < min_window_count
    if low:
        warnings.warn("few samples in the concentration window; slope may be biased",
                      RuntimeWarning, stacklevel=2)
    return KrScalingReport(counts, q, loglog_slope(counts, q), tolerance, low)


# ---------------------------------------------------------------------------
# drift and minorization for the one-dimensional Laplace target

def lyapunov(x, m: float = 0.0, b: float = 1.0):
    """``V = (sup pi)^{1/2} pi^{-1/2} = exp(|x - m| / (2b))`` for Laplace(m, b)."""
    return np.exp(np.abs(np.asarray(x, dtype=float) - m) / (2.0 * b))


def _defect_integrand(t: float, b: float, sigma: float):
    # z is the proposal increment from a point at distance t >= 0 from the mode
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def f(z):
        a = (abs(t + z) - t) / b
        gain = -math.expm1(0.5 * a) if a <= 0 else math.exp(-a) - math.exp(-0.5 * a)
        return gain * c * math.exp(-0.5 * (z / sigma) ** 2)

    return f


def _gauss_legendre(f, edges, nodes: int) -> float:
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        total += half * sum(w * f(mid + half * u) for u, w in zip(xg, wg))
    return total


def _integrate(f, lo, hi, points, quad, tol):
    """Adaptive quadrature on ``[lo, hi]`` split at ``points``, or composite
    Gauss-Legendre with ``quad`` panels per piece when ``quad`` is an int."""
    cuts = sorted({lo, hi, *[p for p in points if lo < p < hi]})
    if isinstance(quad, (int, np.integer)) and not isinstance(quad, bool):
        total = 0.0
        for a, c in zip(cuts[:-1], cuts[1:]):
            total += _gauss_legendre(f, np.linspace(a, c, int(quad) + 1), 10)
        return total, 0.0
    total, err = 0.0, 0.0
    for a, c in zip(cuts[:-1], cuts[1:]):
        v, e = integrate.quad(f, a, c, epsabs=tol * 1e-3, epsrel=1e-12, limit=400)
        total += v
        err += e
    if err > tol:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds {tol:.3g}")
    return total, err


def drift_defect(x: float, s: float, theta: float = 1.0, m: float = 0.0, b: float = 1.0,
                 quad="adaptive", tol: float = 1e-6, width: float = 40.0) -> float:
    """``1 - P_s V(x) / V(x)`` for random-walk Metropolis on Laplace(m, b).

    The proposal is ``N(x, theta^2 s)``.  Rejected mass returns ``V(x)`` and
    cancels, leaving ``int min(1, pi(y)/pi(x)) (1 - V(y)/V(x)) q(y - x) dy``,
    integrated over ``|y - x| <= width * sigma`` with splits where the
    integrand has kinks.
    """
    sigma = theta * math.sqrt(s)
    t = abs(x - m)
    f = _defect_integrand(t, b, sigma)
    r = width * sigma
    val, _ = _integrate(f, -r, r, (0.0, -t, -2.0 * t), quad, tol)
    return val


def drift_defect_limit(s: float, theta: float = 1.0, b: float = 1.0, quad="adaptive",
                       tol: float = 1e-6, width: float = 40.0) -> float:
    """Limit of the defect as ``|x| -> inf``: ``int_0^inf (1 - e^{-z/(2b)})^2 q(z) dz``."""
    sigma = theta * math.sqrt(s)
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    f = lambda z: (-math.expm1(-0.5 * z / b)) ** 2 * c * math.exp(-0.5 * (z / sigma) ** 2)
    val, _ = _integrate(f, 0.0, width * sigma, (), quad, tol)
    return val


def drift_decomposition(x: float, s: float, theta: float = 1.0, m: float = 0.0,
                        b: float = 1.0, tol: float = 1e-6, width: float = 40.0) -> float:
    """The same defect written as an inner gain minus an outer loss.

    ``int_{|y|<t} (1 - e^{-(t-|y|)/(2b)}) q - int_{|y|>t} e^{-(|y|-t)/(2b)}
    (1 - e^{-(|y|-t)/(2b)}) q`` with ``t = |x - m|`` and ``y`` centred at ``m``.
    Used as an independent cross-check of :func:`drift_defect`.
    """
    sigma = theta * math.sqrt(s)
    t = abs(x - m)
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    q = lambda y: c * math.exp(-0.5 * ((y - t) / sigma) ** 2)
    inner = lambda y: -math.expm1(-(t - abs(y)) / (2 * b)) * q(y)

    def outer(y):
        e = math.exp(-(abs(y) - t) / (2 * b))
        return e * (1.0 - e) * q(y)

    lo, hi = t - width * sigma, t + width * sigma
    gain, _ = _integrate(inner, max(-t, lo), min(t, hi), (0.0,), "adaptive", tol) if t > 0 else (0.0, 0.0)
    loss_r, _ = _integrate(outer, t, max(t, hi), (), "adaptive", tol)
    loss_l, _ = _integrate(outer, min(lo, -t), -t, (), "adaptive", tol) if lo < -t else (0.0, 0.0)
    return gain - loss_r - loss_l


def minorization_estimate(s: float, theta: float = 1.0, M: float = 10.0, m: float = 0.0,
                          b: float = 1.0) -> float:
    """Small-set constant ``delta_s`` for ``C = [m - M, m + M]`` and ``nu`` uniform on ``C``.

    For ``x, y`` in ``C`` the kernel density is at least the Gaussian
    proposal density at distance ``2M`` times the smallest density ratio
    ``exp(-M/b)``, so ``delta_s = 2M * phi_sigma(2M) * exp(-M/b)``.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    sigma = theta * math.sqrt(s)
    dens = math.exp(-0.5 * (2.0 * M / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return 2.0 * M * dens * math.exp(-M / b)


@dataclass
class DriftReport:
    """``profile`` holds ``(x, 1 - P_sV(x)/V(x))``; ``drift_b`` is the additive
    constant on the small set so that ``P_sV <= lambda_s V + drift_b 1_C``."""

    s: float
    theta: float
    M: float
    profile: np.ndarray
    inf_tail: float
    tail_limit: float
    lambda_s: float
    drift_b: float
    delta_s: float
    max_ratio: float
    decomposition_gap: float

    @property
    def simple_bound_holds(self) -> bool:
        """``P_sV(x) <= 2 V(x)`` at every grid point."""
        return self.max_ratio <= 2.0

    def to_dict(self) -> dict:
        return {"s": self.s, "theta": self.theta, "M": self.M,
                "profile": self.profile.tolist(), "inf_tail": self.inf_tail,
                "tail_limit": self.tail_limit, "lambda_s": self.lambda_s,
                "drift_b": self.drift_b, "delta_s": self.delta_s,
                "max_ratio": self.max_ratio, "simple_bound_holds": self.simple_bound_holds,
                "decomposition_gap": self.decomposition_gap}


def drift_profile(s: float, theta: float = 1.0, target: Optional[TargetDensity] = None,
                  template: Optional[TemplateKind] = None, x_grid=None, M: float = 10.0,
                  quad="adaptive", tol: float = 1e-6) -> DriftReport:
    """Drift and minorization constants of the fixed-``s`` Metropolis kernel.

    ``inf_tail`` is the infimum of the defect over grid points with
    ``|x - m| >= M`` together with its ``|x| -> inf`` limit;
    ``lambda_s = 1 - inf_tail``.
    """
    m, b = 0.0, 1.0
    if target is not None:
        if target.kind != "laplace" or target.dim != 1:
            raise ValueError("drift_profile supports the one-dimensional Laplace target only")
        m, b = target.m, target.b
    if template is not None and template.kind != "gaussian":
        raise ValueError("drift_profile supports the gaussian template only")
    if not s > 0:
        raise ValueError("s must be positive")
    if x_grid is None:
        x_grid = m + np.concatenate([np.linspace(0.0, M, 41), np.linspace(M, 6 * M, 51)[1:]])
    x_grid = np.asarray(x_grid, dtype=float)
    defect = np.array([drift_defect(x, s, theta, m, b, quad, tol) for x in x_grid])
    limit = drift_defect_limit(s, theta, b, quad, tol)
    tail = np.abs(x_grid - m) >= M
    inf_tail = float(min(limit, defect[tail].min())) if tail.any() else float(limit)
    lam = 1.0 - inf_tail
    inside = ~tail
    v = lyapunov(x_grid, m, b)
    drift_b = float(np.max((((1.0 - defect) - lam) * v)[inside])) if inside.any() else 0.0
    drift_b = max(drift_b, 0.0)
    picks = x_grid[np.linspace(0, x_grid.size - 1, 3).astype(int)]
    gap = max(abs(drift_decomposition(x, s, theta, m, b, tol)
                  - drift_defect(x, s, theta, m, b, "adaptive", tol)) for x in picks)
    return DriftReport(float(s), float(theta), float(M), np.column_stack([x_grid, defect]),
                       inf_tail, float(limit), lam, drift_b,
                       minorization_estimate(s, theta, M, m, b),
                       float(np.max(1.0 - defect)), float(gap))


# ---------------------------------------------------------------------------
# ergodic averages

_REGISTRY: dict = {}


def register_functional(name: str, fn: Callable[[np.ndarray], np.ndarray],
                        breakpoints: Sequence[float] = ()) -> None:
    """Add a named functional ``f`` (vectorized over 1-d samples)."""
    _REGISTRY[name] = (fn, tuple(breakpoints))


register_functional("identity", lambda x: x)
register_functional("square", lambda x: x * x)


def resolve_functional(f_id: str):
    """``(f, breakpoints)`` for a registered name or a parametrized family
    ``exp_abs:GAMMA`` (``exp(GAMMA |x|)`` with ``GAMMA < 1/2``) or
    ``indicator:A,B`` (indicator of ``[A, B]``)."""
    if f_id in _REGISTRY:
        return _REGISTRY[f_id]
    name, _, arg = f_id.partition(":")
    if name == "exp_abs" and arg:
        g = float(arg)
        if not 0 <= g < 0.5:
            raise ValueError("exp_abs needs 0 <= gamma < 1/2")
        return (lambda x: np.exp(g * np.abs(x))), (0.0,)
    if name == "indicator" and arg:
        lo, hi = (float(v) for v in arg.split(","))
        if not lo < hi:
            raise ValueError("indicator window needs A < B")
        return (lambda x: ((x >= lo) & (x <= hi)).astype(float)), (lo, hi)
    raise KeyError(f"unregistered functional {f_id!r}")


def _density_1d(target: TargetDensity):
    if target.dim != 1:
        raise ValueError("reference integrals need a one-dimensional target")
    if target.kind == "laplace":
        m, b = target.m, target.b
        return (lambda x: math.exp(-abs(x - m) / b) / (2 * b)), m, 50.0 * b
    if target.kind == "gaussian":
        mu, sd = float(target.mean[0]), math.sqrt(float(target.cov[0, 0]))
        return (lambda x: math.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))), mu, 40.0 * sd
    raise ValueError(f"no quadrature reference for target kind {target.kind!r}")


def functional_reference(target: TargetDensity, f_id: str, tol: float = 1e-8) -> float:
    """``int f pi`` by adaptive quadrature over ``center +- radius``."""
    f, bps = resolve_functional(f_id)
    dens, c, r = _density_1d(target)
    g = lambda x: float(f(np.array([x]))[0]) * dens(x)
    val, _ = _integrate(g, c - r, c + r, (c, *bps), "adaptive", tol)
    return val


@dataclass
class SllnReport:
    f_id: str
    running_means: np.ndarray
    reference: float
    final_error: float
    n: int
    seed: Optional[int] = None

    def to_dict(self, every: int = 0) -> dict:
        out = {"f_id": self.f_id, "reference": self.reference, "final_error": self.final_error,
               "final_mean": float(self.running_means[-1]), "n": self.n, "seed": self.seed}
        if every:
            out["running_means"] = self.running_means[::every].tolist()
        return out


def ergodic_average(trace, f_id: str, target: Optional[TargetDensity] = None) -> SllnReport:
    """Running means ``n^{-1} sum_{k<=n} f(X_k)`` and the error against ``int f pi``.

    ``trace`` is a :class:`ChainTrace` (its states ``X_1, X_2, ...`` are used
    and its target supplies the reference) or a plain 1-d sample array, in
    which case ``target`` is required.
    """
    f, _ = resolve_functional(f_id)
    seed = None
    if isinstance(trace, ChainTrace):
        if trace.dim != 1:
            raise ValueError("ergodic averages need a one-dimensional chain")
        xs = trace.x[:, 0]
        target = target or trace.target
        seed = trace.seed
    else:
        xs = np.asarray(trace, dtype=float).ravel()
    if target is None:
        raise ValueError("a target is needed for the reference value")
    ref = functional_reference(target, f_id)
    means = np.cumsum(f(xs)) / np.arange(1, xs.size + 1)
    return SllnReport(f_id, means, ref, float(abs(means[-1] - ref)), int(xs.size), seed)


# ---------------------------------------------------------------------------
# eigenvalue floor

@dataclass
class EigenFloorReport:
    window: tuple
    per_trace_min: list
    trend_ratio: list
    seeds: list = field(default_factory=list)

    def count(self, min_trend: float = 0.5) -> int:
        """Number of traces with a positive floor and ``trend_ratio >= min_trend``."""
        return sum(1 for lo, tr in zip(self.per_trace_min, self.trend_ratio)
                   if lo > 0 and tr >= min_trend)

    def to_dict(self) -> dict:
        return {"window": list(self.window), "per_trace_min_lambda_min": self.per_trace_min,
                "trend_ratio": self.trend_ratio, "seeds": self.seeds}


def eigen_floor(traces: Sequence[ChainTrace], window: tuple) -> EigenFloorReport:
    """Minimum of ``lambda_min(S_n)`` over ``window = (n_lo, n_hi)`` per trace,
    and the ratio of the second-half minimum to the first-half minimum."""
    lo, hi = (int(v) for v in window)
    if not 1 <= lo < hi:
        raise ValueError("window must satisfy 1 <= n_lo < n_hi")
    mins, ratios, seeds = [], [], []
    mid = (lo + hi) // 2
    for tr in traces:
        if hi > tr.lambda_min.size:
            raise ValueError(f"window end {hi} lies beyond the trace (length {tr.lambda_min.size})")
        lm = tr.lambda_min
        first = float(lm[lo - 1:mid].min())
        second = float(lm[mid:hi].min())
        mins.append(min(first, second))
        ratios.append(second / first if first > 0 else float("inf"))
        seeds.append(tr.seed)
    return EigenFloorReport((lo, hi), mins, ratios, seeds)
