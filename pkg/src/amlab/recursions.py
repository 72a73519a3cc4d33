"""Deterministic expectation recursions of the adaptive random walk.

Along a fixed unit direction ``u`` the expectations
``a_n = E[u^T (X_n - M_{n-1})(X_n - M_{n-1})^T u]`` and ``b_n = E[u^T S_n u]``
satisfy

    a_{n+1} = (1 - eta_n)^2 a_n + theta^2 b_n
    b_{n+1} = (1 - eta_{n+1}) b_n + eta_{n+1} a_{n+1}

Because ``b_n`` grows like ``exp(O(sqrt(n)))`` the series is stored as
``(ratio_n = a_n / b_n, log b_n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .schedules import WeightSchedule

__all__ = [
    "RecursionSeries",
    "DipProfile",
    "GrowthCheck",
    "GnSeries",
    "expectation_series",
    "direct_expectation_series",
    "dip_profile",
    "growth_bound_check",
    "g_series",
    "g_map",
    "fixed_point",
    "fixed_point_terms",
    "tail_increasing_index",
]


@dataclass
class RecursionSeries:
    """``log_b[i]`` and ``ratio[i]`` belong to index ``n = i + 1``."""

    theta: float
    schedule: WeightSchedule
    log_b: np.ndarray
    ratio: np.ndarray

    @property
    def N(self) -> int:
        return self.log_b.size

    def b(self, n: int) -> float:
        return math.exp(self.log_b[n - 1])

    def a(self, n: int) -> float:
        return self.ratio[n - 1] * math.exp(self.log_b[n - 1])

    def write_csv(self, path, every: int = 1, comment: Optional[str] = None) -> None:
        """Columns ``n, log_b, ratio`` for every ``every``-th index."""
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("n,log_b,ratio\n")
            for i in range(0, self.N, every):
                fh.write(f"{i + 1},{self.log_b[i]:.17g},{self.ratio[i]:.17g}\n")


def expectation_series(theta: float, schedule: WeightSchedule, a1: float = 0.0,
                       b1: float = 1.0, N: int = 10_000) -> RecursionSeries:
    """Run the joint ``(a_n, b_n)`` recursion up to index ``N`` in log form."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if not a1 >= 0 or not b1 > 0:
        raise ValueError("need a1 >= 0 and b1 > 0")
    eta = schedule.weights(1, N)
    log_b = np.empty(N)
    ratio = np.empty(N)
    _kernels.expectation_kernel(float(theta), eta, a1 / b1, log_b, ratio)
    log_b += math.log(b1)
    return RecursionSeries(float(theta), schedule, log_b, ratio)


def direct_expectation_series(theta: float, schedule: WeightSchedule, a1: float = 0.0,
                              b1: float = 1.0, N: int = 1000) -> tuple:
    """Plain-arithmetic ``(a, b)`` arrays; overflows for long horizons, meant for cross-checks."""
    a = np.empty(N)
    b = np.empty(N)
    a[0], b[0] = a1, b1
    for n in range(1, N):
        en, en1 = schedule.weight(n), schedule.weight(n + 1)
        a[n] = (1 - en) ** 2 * a[n - 1] + theta ** 2 * b[n - 1]
        b[n] = (1 - en1) * b[n - 1] + en1 * a[n]
    return a, b


@dataclass
class DipProfile:
    argmin_index: int
    min_value: float
    first_exceed_index: Optional[int]

    def to_dict(self) -> dict:
        return {"argmin_index": self.argmin_index, "min_value": self.min_value,
                "first_exceed_index": self.first_exceed_index}


def dip_profile(theta: float, schedule: WeightSchedule, a1: float = 0.0, b1: float = 1.0,
                N: int = 2_000_000, series: Optional[RecursionSeries] = None) -> DipProfile:
    """Location and depth of the initial decrease of ``b_n``, and when it recovers.

    ``first_exceed_index`` is the first ``n`` with ``b_n > b_1`` (``None`` if
    not reached by ``N``).
    """
    if series is None:
        series = expectation_series(theta, schedule, a1, b1, N)
    lb = series.log_b
    i = int(np.argmin(lb))
    above = np.flatnonzero(lb > lb[0])
    first = int(above[0]) + 1 if above.size else None
    return DipProfile(i + 1, math.exp(lb[i]), first)


def tail_increasing_index(series: RecursionSeries) -> Optional[int]:
    """Smallest ``n`` after which ``b`` is strictly increasing up to the horizon."""
    dec = np.flatnonzero(np.diff(series.log_b) <= 0)
    if dec.size == 0:
        return 1
    last = int(dec[-1]) + 2
    return last if last < series.N else None


@dataclass
class GrowthCheck:
    lhs: float
    mid: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.mid <= self.rhs

    @property
    def normalized(self) -> float:
        """``mid`` divided by ``theta * sum sqrt(eta_j)``."""
        return self.mid / math.sqrt(self.lhs * self.rhs)


def growth_bound_check(series: RecursionSeries, lam: float, n: int, k: int) -> GrowthCheck:
    """Sandwich ``lam**-1 * G <= log(b_{n+k}/b_n) <= lam * G`` with
    ``G = theta * sum_{j=n+1}^{n+k} sqrt(eta_j)``."""
    if not lam > 1:
        raise ValueError("lam must exceed 1")
    if n < 1 or k < 1 or n + k > series.N:
        raise ValueError("need 1 <= n, 1 <= k and n + k within the series")
    g = series.theta * float(np.sum(np.sqrt(series.schedule.weights(n + 1, n + k))))
    mid = float(series.log_b[n + k - 1] - series.log_b[n - 1])
    return GrowthCheck(g / lam, mid, g * lam)


@dataclass
class GnSeries:
    """``g[i]`` is ``g_n`` at ``n = start + i``; ``fixed_points[i]`` is ``x*_n`` at the same ``n``."""

    theta_tilde: float
    start: int
    g: np.ndarray
    fixed_points: np.ndarray

    def at(self, n: int) -> float:
        return float(self.g[n - self.start])

    def write_csv(self, path, every: int = 1, comment: Optional[str] = None) -> None:
        """Columns ``n, g, fixed_point``."""
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("n,g,fixed_point\n")
            for i in range(0, self.g.size, every):
                fp = self.fixed_points[i] if self.fixed_points.size else math.nan
                fh.write(f"{self.start + i},{self.g[i]:.17g},{fp:.17g}\n")


def g_map(n: int, x: float, theta_tilde: float, schedule: WeightSchedule) -> float:
    """The contraction ``f_n`` taking ``g_{n-1}`` to ``g_n``."""
    en, en1 = schedule.weight(n - 1), schedule.weight(n)
    return math.sqrt(en1) * ((1 - en) ** 3 / en * x / (x + en ** -0.5) + theta_tilde ** 2)


def fixed_point_terms(n: int, theta_tilde: float, schedule: WeightSchedule) -> tuple:
    """``(xi_n, mu_n)`` of the quadratic whose positive root is the fixed point of ``f_n``."""
    if n < 2:
        raise ValueError("fixed points are defined for n >= 2")
    en, en1 = schedule.weight(n - 1), schedule.weight(n)
    t2 = theta_tilde * theta_tilde
    xi = en ** -0.5 - math.sqrt(en1) / en * (1 - en) ** 3 - math.sqrt(en1) * t2
    mu = 4.0 * en ** -0.5 * math.sqrt(en1) * t2
    return xi, mu


def fixed_point(n: int, theta_tilde: float, schedule: WeightSchedule) -> float:
    xi, mu = fixed_point_terms(n, theta_tilde, schedule)
    root = math.sqrt(xi * xi + mu)
    # 0.5 * (-xi + root), rearranged to avoid cancellation when xi > 0
    if xi > 0:
        return 0.5 * mu / (xi + root)
    return 0.5 * (root - xi)


def g_series(theta_tilde: float, schedule: WeightSchedule, g_init: float = 0.0,
             m1: int = 1, N: int = 100_000, with_fixed_points: bool = True) -> GnSeries:
    """Iterate ``g_{n+1} = f_{n+1}(g_n)`` from ``g_{m1} = g_init`` up to ``n = N``."""
    if not g_init >= 0:
        raise ValueError("g_init must be non-negative")
    if not theta_tilde > 0:
        raise ValueError("theta_tilde must be positive")
    if N <= m1:
        raise ValueError("need N > m1")
    eta = schedule.weights(m1, N)
    g = np.empty(N - m1 + 1)
    _kernels.g_kernel(float(theta_tilde), eta, float(g_init), g)
    if with_fixed_points:
        fp = np.array([fixed_point(n, theta_tilde, schedule) if n >= 2 else math.nan
                       for n in range(m1, N + 1)])
    else:
        fp = np.empty(0)
    return GnSeries(float(theta_tilde), m1, g, fp)
