"""Spherically symmetric templates, covariance factors and proposal moves.

Increments of the adaptive branch are ``theta * L @ w`` with ``L L^T = S``
and ``w`` a template draw, so a unit-covariance template yields increment
covariance ``theta**2 * S``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import cholesky_lower

__all__ = [
    "NotPositiveDefiniteError",
    "ProposalConfigError",
    "TemplateKind",
    "FixedIncrement",
    "ProposalSpec",
    "CovFactor",
    "cholesky_factor",
    "sample_template",
    "sample_templates",
    "sample_fixed",
    "propose_adaptive",
    "propose_mixture",
    "proposal_from_config",
]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, message: str, matrix: Optional[np.ndarray] = None):
        super().__init__(message)
        self.matrix = matrix


class ProposalConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TemplateKind:
    """Template law: ``"gaussian"``, ``"student"`` (with ``nu``) or ``"uniform_ball"``.

    The Student template has unit shape matrix, so its covariance is
    ``nu / (nu - 2)`` times the identity rather than the identity.
    """

    kind: str = "gaussian"
    nu: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "student", "uniform_ball"):
            raise ProposalConfigError(f"unknown template {self.kind!r}")
        if self.kind == "student" and not self.nu > 0:
            raise ProposalConfigError("student template needs nu > 0")


@dataclass(frozen=True)
class FixedIncrement:
    """Symmetric fixed increment law: ``gaussian`` (``scale`` = sigma0) or ``uniform_ball`` (``scale`` = radius)."""

    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_ball"):
            raise ProposalConfigError(f"unknown fixed increment {self.kind!r}")
        if not self.scale > 0:
            raise ProposalConfigError("fixed increment scale must be positive")


@dataclass(frozen=True)
class ProposalSpec:
    theta: float = 2.4
    template: TemplateKind = TemplateKind()
    beta: float = 0.0
    q_fix: Optional[FixedIncrement] = None

    def __post_init__(self):
        if not self.theta >= 0:
            raise ProposalConfigError("theta must be non-negative")
        if not 0.0 <= self.beta < 1.0:
            raise ProposalConfigError("beta must lie in [0, 1)")
        if self.beta > 0 and self.q_fix is None:
            raise ProposalConfigError("beta > 0 requires a fixed increment law q_fix")

    def to_config(self) -> dict:
        cfg = {"theta": self.theta, "template": self.template.kind, "beta": self.beta}
        if self.template.kind == "student":
            cfg["nu"] = self.template.nu
        if self.q_fix is not None:
            key = "sigma0" if self.q_fix.kind == "gaussian" else "radius"
            cfg["q_fix"] = {"kind": self.q_fix.kind, key: self.q_fix.scale}
        return cfg


@dataclass(frozen=True)
class CovFactor:
    lower_triangular: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower_triangular.shape[0]


def cholesky_factor(s) -> CovFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is not strictly positive.  For the adaptive chain this is
        the collapse diagnostic, so it is never repaired by jitter.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    scale = np.max(np.abs(s)) if s.size else 0.0
    if np.max(np.abs(s - s.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    out = np.zeros_like(s)
    if not cholesky_lower(s, out):
        raise NotPositiveDefiniteError("matrix is not positive definite", s.copy())
    return CovFactor(out)


def _unit_ball(d, size, rng):
    z = rng.standard_normal((size, d))
    r = rng.random(size) ** (1.0 / d)
    return z / np.linalg.norm(z, axis=1, keepdims=True) * r[:, None]


def sample_templates(kind: TemplateKind, d: int, size: int, rng) -> np.ndarray:
    """``size`` independent template draws as a ``(size, d)`` array."""
    if kind.kind == "gaussian":
        return rng.standard_normal((size, d))
    if kind.kind == "student":
        z = rng.standard_normal((size, d))
        g = rng.chisquare(kind.nu, size)
        return z * np.sqrt(kind.nu / g)[:, None]
    return _unit_ball(d, size, rng)


def sample_template(kind: TemplateKind, d: int, rng) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be positive")
    return sample_templates(kind, d, 1, rng)[0]


def sample_fixed(q_fix: FixedIncrement, d: int, size: int, rng) -> np.ndarray:
    if q_fix.kind == "gaussian":
        return q_fix.scale * rng.standard_normal((size, d))
    return q_fix.scale * _unit_ball(d, size, rng)


def propose_adaptive(x, factor: CovFactor, theta: float, kind: TemplateKind, rng=None,
                     w=None) -> np.ndarray:
    """``x + theta * L @ w``; ``w`` is drawn from the template unless given."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if factor.dim != x.size:
        raise ValueError("dimension mismatch between state and covariance factor")
    if w is None:
        w = sample_template(kind, x.size, rng)
    return x + theta * (factor.lower_triangular @ np.atleast_1d(w))


def propose_mixture(x, factor: CovFactor, spec: ProposalSpec, rng) -> tuple:
    """One draw from the mixture proposal; returns ``(y, used_fixed)``.

    Draw order: template vector, then (if ``beta > 0``) the branch uniform,
    then the fixed increment when that branch fires.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = sample_template(spec.template, x.size, rng)
    if spec.beta > 0:
        if spec.q_fix is None:
            raise ProposalConfigError("beta > 0 requires a fixed increment law q_fix")
        if rng.random() < spec.beta:
            return x + sample_fixed(spec.q_fix, x.size, 1, rng)[0], True
    return propose_adaptive(x, factor, spec.theta, spec.template, w=w), False


def proposal_from_config(cfg: dict) -> ProposalSpec:
    template = TemplateKind(cfg.get("template", "gaussian"), float(cfg.get("nu", 0.0)))
    q_fix = None
    qcfg = cfg.get("q_fix")
    if qcfg is not None:
        kind = qcfg.get("kind", "gaussian")
        scale = qcfg.get("sigma0", qcfg.get("radius", qcfg.get("scale", 1.0)))
        q_fix = FixedIncrement(kind, float(scale))
    return ProposalSpec(float(cfg.get("theta", 2.4)), template, float(cfg.get("beta", 0.0)), q_fix)
