"""Maximal coupling of two one-dimensional densities.

Given ``x ~ p``, keep ``y = x`` with probability ``min(1, q(x)/p(x))``;
otherwise draw ``y`` from the residual density proportional to
``max(0, q - p)``.  Then ``y ~ q`` and ``P(x = y) = 1 - TV(p, q)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .rng import as_generator

__all__ = [
    "CouplingError",
    "EnvelopeError",
    "CouplingSpec",
    "CouplingReport",
    "total_variation_1d",
    "maximal_couple",
    "maximal_couple_many",
    "coupling_test",
]

Density = Callable[[np.ndarray], np.ndarray]


class CouplingError(ValueError):
    pass


class EnvelopeError(RuntimeError):
    """Residual rejection sampling failed; ``diagnostics`` describes the envelope."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def _quad_pieces(f, cuts, tol):
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = integrate.quad(f, a, b, epsabs=tol * 1e-2, epsrel=1e-10, limit=400)
        total += v
        err += e
    return total, err


@dataclass
class CouplingSpec:
    """Two densities on ``support`` (outside of which both vanish).

    ``breakpoints`` lists discontinuities or kinks, and ``grid`` is the
    number of cells of the boxed rejection envelope for the residual.
    """

    p: Density
    q: Density
    support: tuple = (-40.0, 40.0)
    breakpoints: Sequence[float] = ()
    grid: int = 2048
    norm_tol: float = 1e-6
    _envelope: Optional[tuple] = field(default=None, init=False, repr=False)
    _cuts: Optional[list] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        lo, hi = self.support
        if not lo < hi or not (math.isfinite(lo) and math.isfinite(hi)):
            raise CouplingError("support must be a finite interval")
        for name in ("p", "q"):
            mass, _ = _quad_pieces(lambda x, f=getattr(self, name): float(f(np.array([x]))[0]),
                                   self._base_cuts(), self.norm_tol)
            if abs(mass - 1.0) > self.norm_tol:
                raise CouplingError(f"density {name} integrates to {mass:.9g}, not 1")

    def _base_cuts(self) -> list:
        lo, hi = self.support
        return sorted({lo, hi, *[b for b in self.breakpoints if lo < b < hi]})

    def residual(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.maximum(0.0, self.q(y) - self.p(y))

    def cuts(self) -> list:
        """Breakpoints plus sign changes of ``q - p`` located on a fine grid."""
        if self._cuts is None:
            base = self._base_cuts()
            xs = np.linspace(base[0], base[-1], 8 * self.grid + 1)
            diff = self.q(xs) - self.p(xs)
            roots = []
            for i in np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0):
                h = lambda x: float(self.q(np.array([x]))[0] - self.p(np.array([x]))[0])
                try:
                    roots.append(optimize.brentq(h, xs[i], xs[i + 1]))
                except ValueError:
                    roots.append(0.5 * (xs[i] + xs[i + 1]))
            self._cuts = sorted(set(base) | set(roots))
        return self._cuts

    def envelope(self) -> tuple:
        """``(edges, heights, cell_mass_cdf)`` of a piecewise-constant bound on the residual.

        Each cell height is the largest residual over a dense sub-grid of the
        cell, inflated by 5 %.  Sampling asserts the bound per draw.
        """
        if self._envelope is None:
            lo, hi = self.support
            edges = np.linspace(lo, hi, self.grid + 1)
            sub = np.linspace(0.0, 1.0, 17)
            pts = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * sub[None, :]
            heights = 1.05 * self.residual(pts).max(axis=1)
            mass = heights * np.diff(edges)
            if not mass.sum() > 0:
                raise EnvelopeError("residual density is zero on the grid",
                                    {"grid": self.grid, "support": self.support})
            self._envelope = (edges, heights, np.cumsum(mass) / mass.sum())
        return self._envelope


def total_variation_1d(p: Density, q: Density, support=(-40.0, 40.0), breakpoints=(),
                       tol: float = 1e-6) -> float:
    """``0.5 * int |p - q|`` by adaptive quadrature split at the crossings of ``p`` and ``q``."""
    spec = p if isinstance(p, CouplingSpec) else CouplingSpec(p, q, tuple(support), breakpoints)
    f = lambda x: 0.5 * abs(float(spec.p(np.array([x]))[0] - spec.q(np.array([x]))[0]))
    val, err = _quad_pieces(f, spec.cuts(), tol)
    if err > tol:
        raise CouplingError(f"quadrature error estimate {err:.3g} exceeds {tol:.3g}")
    return float(min(1.0, max(0.0, val)))


def _sample_residual(spec: CouplingSpec, size: int, rng, cap: int = 100_000) -> np.ndarray:
    edges, heights, cdf = spec.envelope()
    out = np.empty(size)
    filled, tries = 0, 0
    while filled < size:
        need = size - filled
        k = max(64, 2 * need)
        cell = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), heights.size - 1)
        y = edges[cell] + (edges[cell + 1] - edges[cell]) * rng.random(k)
        r = spec.residual(y)
        h = heights[cell]
        if np.any(r > h):
            bad = int(np.argmax(r - h))
            raise EnvelopeError("residual exceeds its envelope",
                                {"y": float(y[bad]), "residual": float(r[bad]),
                                 "envelope": float(h[bad]), "grid": spec.grid})
        ok = rng.random(k) * h < r
        got = y[ok][:need]
        out[filled:filled + got.size] = got
        filled += got.size
        tries += k
        if tries > cap * size:
            raise EnvelopeError("residual rejection exceeded the iteration cap",
                                {"cap": cap, "accepted": filled, "proposed": tries,
                                 "grid": spec.grid})
    if np.any(spec.q(out) <= spec.p(out)):
        raise EnvelopeError("residual draw outside {q > p}", {"grid": spec.grid})
    return out


def maximal_couple(spec: CouplingSpec, x: float, rng=None) -> tuple:
    """Return ``(y, coupled)`` with ``y ~ q`` when ``x ~ p``."""
    gen, _ = as_generator(rng)
    px = float(spec.p(np.array([x]))[0])
    qx = float(spec.q(np.array([x]))[0])
    r = 1.0 if px <= 0 else min(1.0, qx / px)
    if gen.random() < r:
        return float(x), True
    return float(_sample_residual(spec, 1, gen)[0]), False


def maximal_couple_many(spec: CouplingSpec, xs, rng=None) -> tuple:
    """Vectorized :func:`maximal_couple`: arrays ``(y, coupled)``."""
    gen, _ = as_generator(rng)
    xs = np.asarray(xs, dtype=float)
    px, qx = spec.p(xs), spec.q(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(px > 0, np.minimum(1.0, qx / px), 1.0)
    coupled = gen.random(xs.size) < r
    y = xs.copy()
    n_miss = int((~coupled).sum())
    if n_miss:
        y[~coupled] = _sample_residual(spec, n_miss, gen)
    return y, coupled


@dataclass
class CouplingReport:
    tv_oracle: float
    coupled_freq: float
    trials: int
    ks_pvalue: float

    def to_dict(self) -> dict:
        return {"tv_oracle": self.tv_oracle, "coupled_freq": self.coupled_freq,
                "trials": self.trials, "ks_pvalue": self.ks_pvalue}


def coupling_test(spec: CouplingSpec, sample_p: Callable, q_cdf: Callable, trials: int = 100_000,
                  rng=None) -> CouplingReport:
    """Couple ``trials`` draws ``x ~ p`` and test ``y`` against ``q`` (Kolmogorov-Smirnov)."""
    gen, _ = as_generator(rng)
    xs = np.asarray(sample_p(gen, trials), dtype=float)
    y, coupled = maximal_couple_many(spec, xs, gen)
    tv = total_variation_1d(spec, None)
    pval = float(stats.kstest(y, q_cdf).pvalue)
    return CouplingReport(tv, float(coupled.mean()), int(trials), pval)
