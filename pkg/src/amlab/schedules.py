"""Adaptation-weight schedules and finite-horizon assumption checks.

The adaptive chain updates its mean and covariance with weights
``eta_n`` for ``n >= 2``.  Index ``n = 1`` carries the convention
``eta_1 = 1`` so that recursions started at ``n = 1`` need no special case.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InvalidParameterError",
    "ScheduleViolationError",
    "WeightSchedule",
    "AssumptionReport",
    "make_power_schedule",
    "make_custom_schedule",
    "weight",
    "check_assumption_A1",
    "check_assumption_A2",
    "check_assumption_A3",
]

FINITE_HORIZON_CAVEAT = (
    "finite-horizon heuristic: limits and divergence of infinite sums cannot "
    "be certified from a finite prefix"
)


class InvalidParameterError(ValueError):
    pass


class ScheduleViolationError(ValueError):
    """A custom rule produced a weight outside (0, 1)."""


@dataclass(frozen=True)
class WeightSchedule:
    """Deterministic sequence of adaptation weights.

    ``kind == "power"`` gives ``eta_n = c * n**(-gamma)``; ``kind == "custom"``
    evaluates ``custom_rule(n)``.
    """

    kind: str
    c: float = 1.0
    gamma: float = 1.0
    custom_rule: Optional[Callable[[int], float]] = field(default=None, compare=False)

    @property
    def admissible(self) -> bool:
        """Whether ``(c, gamma)`` lies in the box ``(0, 1] x (1/2, 1]``."""
        if self.kind != "power":
            return False
        return 0.0 < self.c <= 1.0 and 0.5 < self.gamma <= 1.0

    def weight(self, n: int) -> float:
        return weight(self, n)

    def weights(self, start: int, stop: int) -> np.ndarray:
        """Weights ``eta_n`` for ``n = start, ..., stop`` (inclusive)."""
        if stop < start:
            return np.empty(0)
        if start < 1:
            raise ValueError("schedule indices start at n = 1")
        if self.kind == "power":
            n = np.arange(start, stop + 1, dtype=float)
            out = self.c * np.power(n, -self.gamma)
        else:
            out = np.array([self._custom(k) for k in range(start, stop + 1)], dtype=float)
        if start == 1:
            out[0] = 1.0
        return out

    def to_config(self) -> dict:
        if self.kind != "power":
            raise ValueError("only power schedules are serializable")
        return {"kind": "power", "c": float(self.c), "gamma": float(self.gamma)}

    def _custom(self, n: int) -> float:
        value = float(self.custom_rule(n))
        if not 0.0 < value < 1.0:
            raise ScheduleViolationError(f"custom weight at n={n} is {value!r}, outside (0, 1)")
        return value


def make_power_schedule(c: float, gamma: float) -> WeightSchedule:
    """Power-law weights ``eta_n = c * n**(-gamma)``.

    ``c = gamma = 1`` reproduces the sample-covariance weighting ``1/n``.
    Parameters outside the admissible box are accepted (``gamma > 0``) but
    flagged through :attr:`WeightSchedule.admissible`.
    """
    if not 0.0 < c <= 1.0:
        raise InvalidParameterError(f"c must lie in (0, 1], got {c!r}")
    if not gamma > 0.0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma!r}")
    return WeightSchedule("power", float(c), float(gamma))


def make_custom_schedule(rule: Callable[[int], float]) -> WeightSchedule:
    return WeightSchedule("custom", custom_rule=rule)


def weight(schedule: WeightSchedule, n: int) -> float:
    if n < 1:
        raise ValueError("schedule indices start at n = 1")
    if n == 1:
        return 1.0
    if schedule.kind == "power":
        # same numpy kernel as WeightSchedule.weights so scalar and vector values agree bitwise
        return float(schedule.c * np.power(np.array([float(n)]), -schedule.gamma)[0])
    return schedule._custom(n)


@dataclass
class AssumptionReport:
    assumption_id: str
    horizon: int
    witnesses: list = field(default_factory=list)
    caveat: str = FINITE_HORIZON_CAVEAT
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.witnesses

    def to_dict(self) -> dict:
        return {
            "assumption_id": self.assumption_id,
            "horizon": self.horizon,
            "passed": self.passed,
            "witnesses": [list(w) for w in self.witnesses],
            "caveat": self.caveat,
            "details": self.details,
        }


def _first_increase(values: np.ndarray, rtol: float = 1e-12) -> Optional[int]:
    """Position of the first ``k`` with ``values[k+1] > values[k]`` beyond rounding."""
    if values.size < 2:
        return None
    slack = rtol * np.maximum(np.abs(values[:-1]), np.abs(values[1:]))
    bad = np.flatnonzero(np.diff(values) > slack)
    return int(bad[0]) if bad.size else None


def check_assumption_A1(schedule: WeightSchedule, m_prime: int, N: int,
                        divergence_threshold: float = 5.0) -> AssumptionReport:
    """Scan ``[m_prime, N]`` for the three weight conditions behind the growth result.

    (i) weights non-increasing and ``eta_N < eta_{m'}/2``; (ii) the increments
    of ``eta_n**(-1/2)`` non-increasing; (iii) ``sum_{n=2}^N eta_n`` above
    ``divergence_threshold``.
    """
    if not 2 <= m_prime < N:
        raise ValueError("need 2 <= m_prime < N")
    eta = schedule.weights(m_prime, N + 1)
    report = AssumptionReport("A1", N)

    k = _first_increase(eta[:-1])
    if k is not None:
        report.witnesses.append((m_prime + k + 1, "(i) weight increases"))
    if not eta[N - m_prime] < 0.5 * eta[0]:
        report.witnesses.append((N, "(i) eta_N not below eta_m'/2"))

    inv_sqrt = eta ** -0.5
    incr = np.diff(inv_sqrt)
    k = _first_increase(incr, rtol=1e-9)
    if k is not None:
        report.witnesses.append((m_prime + k + 1, "(ii) eta^(-1/2) increments increase"))

    total = float(np.sum(schedule.weights(2, N)))
    report.details["partial_sum"] = total
    report.details["divergence_threshold"] = divergence_threshold
    if not total > divergence_threshold:
        report.witnesses.append((N, f"(iii) partial sum {total:.6g} <= {divergence_threshold}"))
    return report


def check_assumption_A2(schedule: WeightSchedule, N: int, tol: float = 1e-3) -> AssumptionReport:
    """Check ``eta_{n+1}/eta_n -> 1``: closeness at ``N`` plus monotone approach on ``[N/2, N]``."""
    if N < 10:
        raise ValueError("need N >= 10")
    if not tol > 0:
        raise ValueError("tol must be positive")
    start = max(2, N // 2)
    eta = schedule.weights(start, N + 1)
    gap = np.abs(eta[1:] / eta[:-1] - 1.0)
    report = AssumptionReport("A2", N)
    report.details["final_ratio_gap"] = float(gap[-1])
    if not gap[-1] <= tol:
        report.witnesses.append((N, f"|eta_(N+1)/eta_N - 1| = {gap[-1]:.6g} > {tol}"))
    k = _first_increase(gap, rtol=1e-6)
    if k is not None:
        report.witnesses.append((start + k + 1, "ratio gap not shrinking"))
    return report


def check_assumption_A3(schedule: WeightSchedule, N: int, l1_threshold: float = 10.0,
                        l2_tail_tol: Optional[float] = None) -> AssumptionReport:
    """Check square-summable but not summable on the finite horizon ``N``.

    The default ``l2_tail_tol`` is ``10 * eta_{N/2}**2 * (N/2)``.
    """
    if N < 10:
        raise ValueError("need N >= 10")
    half = N // 2
    eta = schedule.weights(2, N)
    if l2_tail_tol is None:
        l2_tail_tol = 10.0 * schedule.weight(half) ** 2 * half
    l1 = float(np.sum(eta))
    tail = eta[half - 1:]  # n = half+1, ..., N
    l2_tail = float(np.sum(tail * tail))
    report = AssumptionReport("A3", N)
    report.details.update(l1_sum=l1, l1_threshold=l1_threshold,
                          l2_tail_sum=l2_tail, l2_tail_tol=l2_tail_tol)
    if not l1 >= l1_threshold:
        report.witnesses.append((N, f"l1 partial sum {l1:.6g} < {l1_threshold}"))
    if not l2_tail <= l2_tail_tol:
        report.witnesses.append((N, f"l2 tail sum {l2_tail:.6g} > {l2_tail_tol:.6g}"))
    return report
