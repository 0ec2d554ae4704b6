"""Scalar Gaussian special functions and small dense correlation-matrix algebra.

Provides the standard normal CDF / density / quantile, the Gaussian
isoperimetric profile, the semigroup slope (e^{2t}-1)^{-1/2}, Cholesky
factors with PSD clamping, conditional (Schur) reductions of correlation
matrices, exponential-decay covariances on time grids, and the structural
matrix predicates used by the inequality checks.

All operations are pure functions over immutable inputs; the domain types
are frozen dataclasses wrapping read-only arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Eigenvalues above -PSD_TOL are treated as numerically semidefinite and
# clamped to zero; anything below is a hard error.
PSD_TOL = 1e-10

# Strict positive definiteness threshold for operations that invert.
PD_TOL = 1e-12


class NotPositiveSemidefinite(ValueError):
    """Matrix has an eigenvalue below the semidefiniteness tolerance."""


class SingularMatrix(ValueError):
    """Matrix is numerically singular where strict definiteness is required."""


def _as_square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def _check_symmetric(m, tol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    a = _as_square(m, name)
    if not np.all(np.abs(a - a.T) <= tol * max(1.0, np.abs(a).max())):
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------

def std_normal_cdf(z):
    """Standard normal CDF. Total on the extended reals, vectorized."""
    return special.ndtr(z)


def std_normal_pdf(z):
    """Standard normal density exp(-z^2/2)/sqrt(2*pi)."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


# Acklam's rational approximation to the inverse normal CDF, ~1.15e-9
# relative error, then refined by one Halley step against the CDF.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02,
          -2.759285104469687e+02, 1.383577518672690e+02,
          -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02,
          -1.556989798598866e+02, 6.680131188771972e+01,
          -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01,
          -2.400758277161838e+00, -2.549732539343734e+00,
          4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01,
          2.445134137142996e+00, 3.754408661907416e+00)
_ACK_SPLIT = 0.02425


def _acklam(p: np.ndarray) -> np.ndarray:
    z = np.empty_like(p)
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D

    lo = p < _ACK_SPLIT
    hi = p > 1.0 - _ACK_SPLIT
    mid = ~(lo | hi)

    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        z[lo] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if hi.any():
        q = np.sqrt(-2.0 * np.log1p(-p[hi]))
        z[hi] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        z[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
                 (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    return z


def std_normal_quantile(p):
    """Inverse of the standard normal CDF.

    Rational initializer refined by one Halley step against
    :func:`std_normal_cdf`, giving full double accuracy in the interior.
    Returns -inf at 0 and +inf at 1; rejects p outside [0, 1].
    """
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.isnan(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("quantile argument must lie in [0, 1]")

    z = np.empty_like(arr)
    z[arr == 0.0] = -np.inf
    z[arr == 1.0] = np.inf
    interior = (arr > 0.0) & (arr < 1.0)
    if interior.any():
        zi = _acklam(arr[interior])
        # Halley refinement; skipped in the far tails where exp(z^2/2)
        # would overflow and the initializer is already at float accuracy.
        safe = np.abs(zi) < 37.0
        if safe.any():
            zs = zi[safe]
            err = special.ndtr(zs) - arr[interior][safe]
            u = err * SQRT_2PI * np.exp(0.5 * zs * zs)
            zi[safe] = zs - u / (1.0 + 0.5 * zs * u)
        z[interior] = zi
    return float(z[0]) if scalar else z


def isoperimetric_profile(x):
    """Gaussian isoperimetric profile: density evaluated at the quantile.

    Vanishes at 0 and 1 and is symmetric about 1/2.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.zeros_like(arr)
    interior = (arr > 0.0) & (arr < 1.0)
    if np.any(np.isnan(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("profile argument must lie in [0, 1]")
    if interior.any():
        out[interior] = std_normal_pdf(std_normal_quantile(arr[interior]))
    return float(out[0]) if scalar else out


def semigroup_slope(t: float) -> float:
    """Slope (e^{2t}-1)^{-1/2} of the quantile-transformed heat flow on
    half-space indicators; also the gradient bound for general indicators.

    Strictly decreasing, diverges as t -> 0+ and vanishes as t -> inf.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError(f"time must be positive, got {t}")
    return 1.0 / math.sqrt(math.expm1(2.0 * t))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric PSD matrix with unit diagonal.

    The constructor symmetrizes exactly, pins the diagonal to 1 (inputs
    must already be within 1e-8 of that; use :meth:`from_covariance` for
    the general rescaling) and records whether all entries are
    nonnegative, which is the hypothesis of the half-space bound.
    """
    entries: np.ndarray
    nonnegative: bool = field(init=False)

    def __post_init__(self):
        m = _check_symmetric(self.entries, name="correlation matrix")
        if m.shape[0] < 1:
            raise ValueError("correlation matrix must be at least 1x1")
        if not np.all(np.abs(np.diag(m) - 1.0) <= 1e-8):
            raise ValueError("correlation matrix must have unit diagonal "
                             "(use from_covariance to rescale)")
        np.fill_diagonal(m, 1.0)
        w = np.linalg.eigvalsh(m)
        if w[0] < -PSD_TOL:
            raise NotPositiveSemidefinite(
                f"minimum eigenvalue {w[0]:.3e} below -{PSD_TOL:.0e}")
        object.__setattr__(self, "entries", _readonly(m))
        object.__setattr__(self, "nonnegative", bool(np.all(m >= 0.0)))

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def is_strictly_pd(self, tol: float = PD_TOL) -> bool:
        return self.min_eigenvalue() > tol

    @classmethod
    def from_covariance(cls, cov) -> "CorrelationMatrix":
        """Rescale a general PSD covariance to unit diagonal."""
        c = _check_symmetric(cov, name="covariance")
        d = np.diag(c)
        if np.any(d <= 0.0):
            raise ValueError("covariance diagonal must be positive to rescale")
        s = 1.0 / np.sqrt(d)
        return cls(c * np.outer(s, s))

    @classmethod
    def identity(cls, k: int) -> "CorrelationMatrix":
        return cls(np.eye(int(k)))

    @classmethod
    def equicorrelated(cls, k: int, rho: float) -> "CorrelationMatrix":
        k = int(k)
        m = np.full((k, k), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls(m)


@dataclass(frozen=True, eq=False)
class SchurData:
    """Conditional reduction of a correlation matrix at one coordinate.

    ``cond_mean_row`` holds the conditional-mean coefficients of the
    remaining coordinates given the removed one; ``reduced`` is their
    conditional covariance (general diagonal). Satisfies
    reduced^{-1} == inverse-of-source with the removed row/column deleted.
    """
    removed_index: int
    cond_mean_row: np.ndarray
    reduced: np.ndarray


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular Q with QQ^T equal to the factored matrix."""
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _readonly(self.q))


# ---------------------------------------------------------------------------
# matrix operations
# ---------------------------------------------------------------------------

def cholesky(m, tol: float = PSD_TOL) -> CholeskyFactor:
    """Lower-triangular factor of a symmetric PSD matrix.

    Strictly PD inputs go straight to the standard factorization.
    Semidefinite inputs (eigenvalues in [-tol, ~0]) are clamped and
    factored with a 1e-13 diagonal jitter, so the reconstruction error
    stays far below tol. Eigenvalues below -tol raise.
    """
    a = _check_symmetric(m)
    try:
        return CholeskyFactor(np.linalg.cholesky(a))
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(a)
    if w[0] < -tol:
        raise NotPositiveSemidefinite(
            f"minimum eigenvalue {w[0]:.3e} below -{tol:.0e}")
    w = np.clip(w, 0.0, None)
    a2 = (v * w) @ v.T
    a2 = 0.5 * (a2 + a2.T) + 1e-13 * np.eye(a.shape[0])
    return CholeskyFactor(np.linalg.cholesky(a2))


def conditional_reduction(cov, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Conditional-mean coefficients and conditional covariance of a
    general-diagonal Gaussian covariance given coordinate ``i``.

    Returns (coef, reduced): conditioned on X_i = x, the remaining
    coordinates have mean x*coef and covariance ``reduced``.
    """
    c = _as_square(cov, "covariance")
    k = c.shape[0]
    if not 0 <= i < k:
        raise IndexError(f"index {i} out of range for dimension {k}")
    vii = c[i, i]
    if vii <= 0.0:
        raise SingularMatrix("conditioning coordinate has nonpositive variance")
    keep = [j for j in range(k) if j != i]
    col = c[keep, i]
    coef = col / vii
    reduced = c[np.ix_(keep, keep)] - np.outer(col, col) / vii
    return coef, 0.5 * (reduced + reduced.T)


def schur_complement(m: CorrelationMatrix, i: int) -> SchurData:
    """Conditional reduction of a strictly PD correlation matrix at ``i``."""
    if not m.is_strictly_pd():
        raise SingularMatrix("correlation matrix is numerically singular")
    coef, reduced = conditional_reduction(m.entries, i)
    return SchurData(removed_index=int(i),
                     cond_mean_row=_readonly(coef),
                     reduced=_readonly(reduced))


def ou_covariance(times) -> CorrelationMatrix:
    """Correlation matrix exp(-|t_i - t_j|) of a stationary exponential-decay
    process observed on a strictly increasing time grid."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("times must be a nonempty 1-d sequence")
    if not np.all(np.diff(t) > 0.0):
        raise ValueError("times must be strictly increasing")
    return CorrelationMatrix(np.exp(-np.abs(t[:, None] - t[None, :])))


def inverse_offdiag_nonpositive(m: CorrelationMatrix, tol: float = 1e-10) -> bool:
    """True iff every off-diagonal entry of the inverse is <= tol.

    This is the conditional-positive-correlation hypothesis; entrywise
    nonnegativity of the matrix itself is the other hypothesis, and
    neither implies the other.
    """
    if not m.is_strictly_pd():
        raise SingularMatrix("correlation matrix is numerically singular")
    inv = np.linalg.inv(m.entries)
    off = inv[~np.eye(m.k, dtype=bool)]
    return bool(off.size == 0 or off.max() <= tol)


def laplacian_quadratic_form(a, v, tol: float = 1e-10) -> float:
    """Quadratic form of a zero-row-sum matrix via its pair decomposition.

    For a with a_ii = -sum_{j!=i} a_ij, returns
    -sum_{i<j} a_ij (v_i - v_j)^2, which equals v^T a v. The all-ones
    vector is always in the kernel.
    """
    am = _as_square(a, "matrix")
    vv = np.asarray(v, dtype=float)
    k = am.shape[0]
    if vv.shape != (k,):
        raise ValueError(f"vector length {vv.shape} does not match matrix {k}")
    row_resid = np.abs(am.sum(axis=1))
    if np.any(row_resid > tol * max(1.0, np.abs(am).max())):
        raise ValueError(f"row sums must vanish (max residual {row_resid.max():.3e})")
    iu, ju = np.triu_indices(k, 1)
    diff = vv[iu] - vv[ju]
    return float(-np.sum(am[iu, ju] * diff * diff))


def max_eigenvalue(m) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    a = _check_symmetric(m)
    return float(np.linalg.eigvalsh(a)[-1])
