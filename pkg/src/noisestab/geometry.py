"""Measurable subsets of R^n as an expression algebra.

Leaves are closed half-spaces, balls, and axis-aligned boxes; nodes are
complement, intersection, and union. Indicator evaluation is exact and
vectorized; Gaussian measure is analytic for half-spaces and centered
balls and Monte Carlo otherwise; epsilon-enlargement has closed form for
half-spaces, balls, and unions thereof.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .orthant import Estimate
from .gaussian import std_normal_quantile
from .seeding import check_seed, derive_rng

DEFAULT_MEASURE_SAMPLES = 10**6
_MC_BATCH = 1 << 20


class UnsupportedRegion(ValueError):
    """Operation has no closed form on this expression shape."""


class SetExpr:
    """Base class for set expressions; all concrete sets are frozen."""

    @property
    def dim(self) -> int:
        raise NotImplementedError


def _unit(v) -> tuple[np.ndarray, float]:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("normal must be a nonempty vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("normal must be finite")
    nrm = float(np.linalg.norm(a))
    if nrm == 0.0:
        raise ValueError("normal must be nonzero")
    return a / nrm, nrm


@dataclass(frozen=True, eq=False)
class HalfSpace(SetExpr):
    """Closed half-space {x : x . normal <= offset}, stored canonically
    with a unit normal and correspondingly scaled offset."""
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        unit, nrm = _unit(self.normal)
        unit.setflags(write=False)
        object.__setattr__(self, "normal", unit)
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    @property
    def dim(self) -> int:
        return self.normal.size


@dataclass(frozen=True, eq=False)
class Ball(SetExpr):
    """Closed ball {x : |x - center| <= radius}."""
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.size < 1 or not np.all(np.isfinite(c)):
            raise ValueError("center must be a finite nonempty vector")
        if not float(self.radius) >= 0.0:
            raise ValueError("radius must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True, eq=False)
class AxisBox(SetExpr):
    """Closed box {x : lower_i <= x_i <= upper_i}; infinite bounds allowed."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise ValueError("box bounds must be matching nonempty vectors")
        if np.any(lo > hi):
            raise ValueError("box lower bounds must not exceed upper bounds")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size


def _common_dim(parts: tuple[SetExpr, ...]) -> int:
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise ValueError(f"mixed ambient dimensions {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class Complement(SetExpr):
    inner: SetExpr

    @property
    def dim(self) -> int:
        return self.inner.dim


@dataclass(frozen=True, eq=False)
class Intersection(SetExpr):
    parts: tuple[SetExpr, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("intersection needs at least one part")
        _common_dim(parts)
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim


@dataclass(frozen=True, eq=False)
class Union(SetExpr):
    parts: tuple[SetExpr, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("union needs at least one part")
        _common_dim(parts)
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim


@dataclass(frozen=True, eq=False)
class SetSystem:
    """Ordered collection (A_1, ..., A_k) in a common ambient dimension."""
    sets: tuple[SetExpr, ...]

    def __post_init__(self):
        parts = tuple(self.sets)
        if not parts:
            raise ValueError("a set system needs at least one set")
        _common_dim(parts)
        object.__setattr__(self, "sets", parts)

    @property
    def k(self) -> int:
        return len(self.sets)

    @property
    def dim(self) -> int:
        return self.sets[0].dim


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _contains(s: SetExpr, pts: np.ndarray) -> np.ndarray:
    if isinstance(s, HalfSpace):
        return pts @ s.normal <= s.offset
    if isinstance(s, Ball):
        d = pts - s.center
        return np.einsum("ij,ij->i", d, d) <= s.radius * s.radius
    if isinstance(s, AxisBox):
        return np.all((pts >= s.lower) & (pts <= s.upper), axis=1)
    if isinstance(s, Complement):
        return ~_contains(s.inner, pts)
    if isinstance(s, Intersection):
        out = _contains(s.parts[0], pts)
        for p in s.parts[1:]:
            out &= _contains(p, pts)
        return out
    if isinstance(s, Union):
        out = _contains(s.parts[0], pts)
        for p in s.parts[1:]:
            out |= _contains(p, pts)
        return out
    raise TypeError(f"not a set expression: {type(s).__name__}")


def contains(s: SetExpr, x) -> bool | np.ndarray:
    """Exact membership; boundary points count as inside for the closed
    leaves. Accepts one point (n,) or a batch (N, n)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        if pts.size != s.dim:
            raise ValueError(f"point dimension {pts.size} != set dimension {s.dim}")
        return bool(_contains(s, pts[None, :])[0])
    if pts.ndim != 2 or pts.shape[1] != s.dim:
        raise ValueError(f"points must have shape (N, {s.dim})")
    return _contains(s, pts)


def gaussian_measure(s: SetExpr, samples: int = DEFAULT_MEASURE_SAMPLES,
                     seed: int = 0) -> Estimate:
    """Standard Gaussian measure of a set expression.

    Half-spaces and centered balls are analytic (std_error 0, samples 0);
    everything else is a Monte Carlo indicator average.
    """
    seed = check_seed(seed)
    if isinstance(s, HalfSpace):
        return Estimate(value=float(special.ndtr(s.offset)), std_error=0.0,
                        samples=0, seed=seed)
    if isinstance(s, Ball) and np.all(s.center == 0.0):
        v = float(special.gammainc(s.dim / 2.0, 0.5 * s.radius * s.radius))
        return Estimate(value=v, std_error=0.0, samples=0, seed=seed)
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    hits = 0
    done = 0
    batch = 0
    while done < samples:
        n = min(_MC_BATCH, samples - done)
        rng = derive_rng(seed, "gaussian_measure", batch)
        pts = rng.standard_normal((n, s.dim))
        hits += int(_contains(s, pts).sum())
        done += n
        batch += 1
    value = hits / samples
    se = np.sqrt(max(value * (1.0 - value), 0.0) / samples)
    return Estimate(value=float(value), std_error=float(se),
                    samples=samples, seed=seed)


def parallel_halfspaces(measures, direction) -> list[HalfSpace]:
    """Half-spaces sharing ``direction`` with the prescribed Gaussian
    measures: offsets are the normal quantiles of the measures."""
    p = np.asarray(measures, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("measures must be a nonempty vector")
    if np.any((p < 0.0) | (p > 1.0)) or np.any(np.isnan(p)):
        raise ValueError("measures must lie in [0, 1]")
    unit, _ = _unit(direction)
    return [HalfSpace(unit, std_normal_quantile(pi)) for pi in p]


def enlarge(s: SetExpr, eps: float) -> SetExpr:
    """Epsilon-enlargement (all points within distance eps).

    Closed form exists for half-spaces (offset shift), balls (radius
    growth), and unions of supported shapes; other nodes raise
    UnsupportedRegion because enlargement does not distribute over them.
    """
    e = float(eps)
    if not e >= 0.0:
        raise ValueError("enlargement distance must be nonnegative")
    if isinstance(s, HalfSpace):
        return HalfSpace(s.normal, s.offset + e)
    if isinstance(s, Ball):
        return Ball(s.center, s.radius + e)
    if isinstance(s, Union):
        return Union(tuple(enlarge(p, e) for p in s.parts))
    raise UnsupportedRegion(
        f"enlargement has no closed form for {type(s).__name__}")
