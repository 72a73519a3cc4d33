"""Target densities evaluated in log space, and the Metropolis acceptance rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DimensionError",
    "InvalidChainStateError",
    "TargetDensity",
    "improper_uniform",
    "laplace",
    "gaussian",
    "custom",
    "log_density",
    "acceptance_probability",
    "target_from_config",
]

# Kind codes shared with the compiled chain kernel.
UNIFORM, LAPLACE, GAUSSIAN, CUSTOM = 0, 1, 2, 3
_CODES = {"improper_uniform": UNIFORM, "laplace": LAPLACE, "gaussian": GAUSSIAN, "custom": CUSTOM}


class DimensionError(ValueError):
    pass


class InvalidChainStateError(RuntimeError):
    """The current chain state has zero target density."""


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """Target density ``pi`` known through ``log pi`` up to an additive constant.

    ``laplace`` is a product of i.i.d. Laplace(m, b) coordinates (for ``dim == 1``
    the usual ``exp(-|x - m|/b) / (2b)``).
    """

    kind: str
    dim: int
    m: float = 0.0
    b: float = 1.0
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None
    log_density_fn: Optional[Callable[[np.ndarray], float]] = None
    _prec_chol: Optional[np.ndarray] = field(default=None, repr=False)
    _log_norm: float = field(default=0.0, repr=False)

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    @property
    def is_uniform(self) -> bool:
        return self.kind == "improper_uniform"

    def log_density(self, x) -> float:
        return log_density(self, x)

    def kernel_params(self):
        """Flat parameter arrays consumed by the compiled chain kernel."""
        d = self.dim
        if self.kind == "gaussian":
            return (np.array([self._log_norm]), self.mean.copy(), self._prec_chol.copy())
        if self.kind == "laplace":
            return (np.array([self.m, self.b]), np.zeros(d), np.zeros((d, d)))
        return (np.zeros(2), np.zeros(d), np.zeros((d, d)))

    def to_config(self) -> dict:
        if self.kind == "improper_uniform":
            return {"kind": "uniform", "dim": self.dim}
        if self.kind == "laplace":
            return {"kind": "laplace", "dim": self.dim, "m": self.m, "b": self.b}
        if self.kind == "gaussian":
            return {"kind": "gaussian", "dim": self.dim, "mean": self.mean.tolist(),
                    "cov": self.cov.tolist()}
        raise ValueError("custom targets are not serializable")


def improper_uniform(dim: int = 1) -> TargetDensity:
    if dim < 1:
        raise DimensionError("dim must be positive")
    return TargetDensity("improper_uniform", int(dim))


def laplace(m: float = 0.0, b: float = 1.0, dim: int = 1) -> TargetDensity:
    if not b > 0:
        raise ValueError("Laplace scale b must be positive")
    if dim < 1:
        raise DimensionError("dim must be positive")
    return TargetDensity("laplace", int(dim), m=float(m), b=float(b))


def gaussian(mean, cov) -> TargetDensity:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.size
    if cov.shape != (d, d):
        raise DimensionError(f"covariance shape {cov.shape} does not match mean of length {d}")
    chol = np.linalg.cholesky(cov)
    # log pi(x) = log_norm - 0.5 * |P (x - mean)|^2 with P = chol^{-1}
    prec_chol = np.linalg.inv(chol)
    log_norm = -0.5 * d * math.log(2.0 * math.pi) - float(np.sum(np.log(np.diag(chol))))
    return TargetDensity("gaussian", d, mean=mean, cov=cov, _prec_chol=prec_chol,
                         _log_norm=log_norm)


def custom(log_density_fn: Callable[[np.ndarray], float], dim: int) -> TargetDensity:
    return TargetDensity("custom", int(dim), log_density_fn=log_density_fn)


def log_density(target: TargetDensity, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (target.dim,):
        raise DimensionError(f"expected a point of dimension {target.dim}, got shape {x.shape}")
    kind = target.kind
    if kind == "improper_uniform":
        return 0.0
    if kind == "laplace":
        return float(-target.dim * math.log(2.0 * target.b) - np.sum(np.abs(x - target.m)) / target.b)
    if kind == "gaussian":
        z = target._prec_chol @ (x - target.mean)
        return float(target._log_norm - 0.5 * (z @ z))
    value = float(target.log_density_fn(x))
    if math.isnan(value):
        raise ValueError("custom log-density returned NaN")
    return value


def acceptance_probability(target: TargetDensity, x, y) -> float:
    """``min{1, pi(y)/pi(x)}`` computed from the log-density difference."""
    lx = log_density(target, x)
    if lx == -math.inf:
        raise InvalidChainStateError("current state has zero target density")
    ly = log_density(target, y)
    if ly == -math.inf:
        return 0.0
    return math.exp(min(0.0, ly - lx))


def target_from_config(cfg: dict) -> TargetDensity:
    kind = cfg.get("kind", "uniform")
    dim = int(cfg.get("dim", 1))
    if kind in ("uniform", "improper_uniform"):
        return improper_uniform(dim)
    if kind == "laplace":
        return laplace(cfg.get("m", 0.0), cfg.get("b", 1.0), dim)
    if kind == "gaussian":
        mean = cfg.get("mean", [0.0] * dim)
        cov = cfg.get("cov", np.eye(len(mean)).tolist())
        return gaussian(mean, cov)
    raise ValueError(f"unknown target kind {kind!r}")
