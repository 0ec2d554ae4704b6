"""Ornstein-Uhlenbeck path simulation and semigroup estimators.

Stepping uses the exact Gaussian transition
X_{t+d} = e^{-d} X_t + sqrt(1 - e^{-2d}) xi, started from the stationary
standard Gaussian, so the only discretization effect left in the exit
and occupation estimators is undetected excursions between grid points.
Grid survival therefore over-estimates true survival (one-sided bias);
refining the grid only tightens it, which the refined estimators expose
by evaluating the coarse and fine events on the same trajectories.

Comparisons (set A versus set B) reuse identical trajectories per path
index: common random numbers, so margins carry a paired standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .gaussian import CorrelationMatrix, cholesky, semigroup_slope, \
    std_normal_quantile, _readonly
from .geometry import HalfSpace, SetExpr, contains
from .orthant import Estimate
from .seeding import check_seed, derive_rng

_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class OUPath:
    """One trajectory on a time grid; states are (len(times), n)."""
    times: np.ndarray
    states: np.ndarray
    seed: int


@dataclass(frozen=True, eq=False)
class KroneckerSampler:
    """Joint sampler for k correlated standard Gaussian n-vectors.

    Mixes k iid standard n-vectors through the k x k Cholesky factor of
    the correlation matrix; the kn x kn covariance is never formed.
    """
    m: CorrelationMatrix
    n: int
    q: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("ambient dimension must be >= 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "q", cholesky(self.m.entries).q)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """(count, k, n) array of joint draws."""
        rng = derive_rng(check_seed(seed), "kronecker")
        z = rng.standard_normal((int(count), self.m.k, self.n))
        return np.einsum("ij,cjn->cin", self.q, z)


@dataclass(frozen=True)
class ExitTimeEstimate:
    """Grid survival probability Pr(X_{i tau/steps} in A for i=0..steps)."""
    horizon: float
    steps: int
    survival: Estimate


@dataclass(frozen=True)
class OccupationEstimate:
    """Expected time in A_2 before leaving A_1, truncated at the horizon."""
    horizon: float
    sets: tuple[SetExpr, SetExpr]
    value: Estimate


def sample_joint(m: CorrelationMatrix, n: int, seed: int) -> np.ndarray:
    """One draw of (X_1, ..., X_k), returned as a (k, n) array."""
    return KroneckerSampler(m, n).sample(1, seed)[0]


def simulate_path(n: int, grid, seed: int) -> OUPath:
    """Exact-transition trajectory on a nondecreasing grid starting at 0.

    The initial state is stationary; repeated grid times reproduce the
    state exactly.
    """
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if t[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(t) < 0.0):
        raise ValueError("grid must be nondecreasing")
    seed = check_seed(seed)
    rng = derive_rng(seed, "path")
    states = np.empty((t.size, int(n)))
    states[0] = rng.standard_normal(int(n))
    for j in range(1, t.size):
        d = t[j] - t[j - 1]
        decay = math.exp(-d)
        scale = math.sqrt(max(0.0, -math.expm1(-2.0 * d)))
        states[j] = decay * states[j - 1] + scale * rng.standard_normal(int(n))
    return OUPath(times=_readonly(t), states=_readonly(states), seed=seed)


# ---------------------------------------------------------------------------
# streaming grid scans
# ---------------------------------------------------------------------------

def _grid_params(tau: float, steps: int):
    tau = float(tau)
    steps = int(steps)
    if tau < 0.0:
        raise ValueError("horizon must be nonnegative")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    d = tau / steps
    return tau, steps, math.exp(-d), math.sqrt(max(0.0, -math.expm1(-2.0 * d)))


def _survival_scan(regions, tau, steps, paths, seed, refine: int = 1):
    """Shared-trajectory grid survival for several regions at once.

    Simulates at ``steps * refine`` resolution and tracks, per region,
    the event over the full fine grid and over the coarse subgrid
    (every ``refine``-th point, including t=0). Returns per-region
    coarse counts, fine counts, the coarse joint count of the first two
    regions (for paired comparisons), and the first and second moments
    of the per-path coarse-minus-fine margin difference between region
    1 and region 0.
    """
    tau, steps, _, _ = _grid_params(tau, steps)
    refine = int(refine)
    fine_steps = steps * refine
    _, _, decay, scale = _grid_params(tau, fine_steps)
    paths = int(paths)
    if paths < 1:
        raise ValueError("paths must be >= 1")
    seed = check_seed(seed)
    n = regions[0].dim
    r = len(regions)
    coarse = np.zeros(r, dtype=np.int64)
    fine = np.zeros(r, dtype=np.int64)
    joint01 = 0
    dsum = 0
    dsum2 = 0
    done = 0
    chunk_index = 0
    while done < paths:
        c = min(_CHUNK, paths - done)
        rng = derive_rng(seed, "exit", chunk_index)
        states = rng.standard_normal((c, n))
        alive_f = [contains(reg, states) for reg in regions]
        alive_c = [a.copy() for a in alive_f]
        for i in range(1, fine_steps + 1):
            states = decay * states + scale * rng.standard_normal((c, n))
            on_coarse = (i % refine) == 0
            for idx, reg in enumerate(regions):
                inside = contains(reg, states)
                alive_f[idx] &= inside
                if on_coarse:
                    alive_c[idx] &= inside
        for idx in range(r):
            coarse[idx] += int(alive_c[idx].sum())
            fine[idx] += int(alive_f[idx].sum())
        if r >= 2:
            joint01 += int((alive_c[0] & alive_c[1]).sum())
            # margin stability under refinement, per path:
            # (1B - 1A) on the coarse grid minus the same on the fine grid
            d = (alive_c[1].astype(np.int64) - alive_c[0]) \
                - (alive_f[1].astype(np.int64) - alive_f[0])
            dsum += int(d.sum())
            dsum2 += int((d * d).sum())
        done += c
        chunk_index += 1
    return coarse, fine, joint01, dsum, dsum2


def _binomial_estimate(count, paths, seed) -> Estimate:
    value = count / paths
    se = math.sqrt(max(value * (1.0 - value), 0.0) / paths)
    return Estimate(value=float(value), std_error=se, samples=paths, seed=seed)


def exit_survival(s: SetExpr, tau: float, steps: int, paths: int,
                  seed: int) -> ExitTimeEstimate:
    """Probability of staying in ``s`` at every grid time i*tau/steps.

    Over-estimates the continuous-time survival Pr(exit time >= tau);
    the state at t=0 is checked too, so an initial draw outside the set
    counts as an immediate exit.
    """
    coarse, _, _, _, _ = _survival_scan([s], tau, steps, paths, seed)
    return ExitTimeEstimate(horizon=float(tau), steps=int(steps),
                            survival=_binomial_estimate(int(coarse[0]),
                                                        int(paths), seed))


def exit_survival_refined(s: SetExpr, tau, steps, paths, seed,
                          refine: int = 2):
    """Coarse and refined survival on shared trajectories.

    The fine event is a subset of the coarse one path by path, so the
    returned (coarse, fine, change, change_se) has change >= 0 exactly;
    change quantifies the remaining discretization bias at ``steps``.
    """
    coarse, fine, _, _, _ = _survival_scan([s], tau, steps, paths, seed,
                                           refine=refine)
    paths = int(paths)
    ce = _binomial_estimate(int(coarse[0]), paths, seed)
    fe = _binomial_estimate(int(fine[0]), paths, seed)
    change = (int(coarse[0]) - int(fine[0])) / paths
    change_se = math.sqrt(max(change * (1.0 - change), 0.0) / paths)
    return (ExitTimeEstimate(float(tau), int(steps), ce),
            ExitTimeEstimate(float(tau), int(steps) * refine, fe),
            change, change_se)


def exit_survival_pair(a: SetExpr, b: SetExpr, tau, steps, paths, seed):
    """Survival of two sets on identical trajectories.

    Returns (estimate_a, estimate_b, paired_se) where paired_se is the
    standard error of the difference mean(1_b_alive - 1_a_alive) under
    common random numbers.
    """
    coarse, _, joint, _, _ = _survival_scan([a, b], tau, steps, paths, seed)
    paths = int(paths)
    var_diff = _paired_indicator_variance(int(coarse[0]), int(coarse[1]),
                                          joint, paths)
    est_a = ExitTimeEstimate(float(tau), int(steps),
                             _binomial_estimate(int(coarse[0]), paths, seed))
    est_b = ExitTimeEstimate(float(tau), int(steps),
                             _binomial_estimate(int(coarse[1]), paths, seed))
    return est_a, est_b, math.sqrt(var_diff / paths)


def _paired_indicator_variance(na: int, nb: int, nab: int, n: int) -> float:
    # Var(1_b - 1_a) from joint counts; exactly zero for identical events.
    mean_d = (nb - na) / n
    return max((na + nb - 2 * nab) / n - mean_d * mean_d, 0.0)


@dataclass(frozen=True)
class DominanceRefinement:
    """Dominance comparison plus its stability under grid doubling, all
    on shared trajectories.

    ``change_a/b`` are the exact per-arm survival drops when the grid is
    doubled (nonnegative pathwise); ``margin_change`` is how much the
    dominance margin moves, with its own paired standard error.
    """
    est_a: ExitTimeEstimate
    est_b: ExitTimeEstimate
    paired_se: float
    change_a: float
    change_a_se: float
    change_b: float
    change_b_se: float
    margin_change: float
    margin_change_se: float


def exit_dominance_refined(a: SetExpr, b: SetExpr, tau, steps, paths, seed,
                           refine: int = 2) -> DominanceRefinement:
    """One coupled pass evaluating both arms at ``steps`` and at
    ``steps * refine`` on the same trajectories."""
    coarse, fine, joint, dsum, dsum2 = _survival_scan([a, b], tau, steps,
                                                      paths, seed,
                                                      refine=refine)
    paths = int(paths)
    var_diff = _paired_indicator_variance(int(coarse[0]), int(coarse[1]),
                                          joint, paths)
    est_a = ExitTimeEstimate(float(tau), int(steps),
                             _binomial_estimate(int(coarse[0]), paths, seed))
    est_b = ExitTimeEstimate(float(tau), int(steps),
                             _binomial_estimate(int(coarse[1]), paths, seed))

    def change(idx):
        ch = (int(coarse[idx]) - int(fine[idx])) / paths
        return ch, math.sqrt(max(ch * (1.0 - ch), 0.0) / paths)

    ch_a, ch_a_se = change(0)
    ch_b, ch_b_se = change(1)
    mean_d = dsum / paths
    var_d = max(dsum2 / paths - mean_d * mean_d, 0.0)
    return DominanceRefinement(
        est_a=est_a, est_b=est_b, paired_se=math.sqrt(var_diff / paths),
        change_a=ch_a, change_a_se=ch_a_se,
        change_b=ch_b, change_b_se=ch_b_se,
        margin_change=mean_d, margin_change_se=math.sqrt(var_d / paths))


def _occupation_scan(pairs, tau, steps, paths, seed):
    """Per-path occupation step counts for one or two (A_1, A_2) pairs
    on shared trajectories. Returns per-pair (sum, sum of squares) and,
    with two pairs, the same for the per-path count difference."""
    tau, steps, decay, scale = _grid_params(tau, steps)
    paths = int(paths)
    if paths < 1:
        raise ValueError("paths must be >= 1")
    seed = check_seed(seed)
    n = pairs[0][0].dim
    r = len(pairs)
    tot = np.zeros(r)
    tot2 = np.zeros(r)
    dtot = 0.0
    dtot2 = 0.0
    done = 0
    chunk_index = 0
    while done < paths:
        c = min(_CHUNK, paths - done)
        rng = derive_rng(seed, "exit", chunk_index)
        states = rng.standard_normal((c, n))
        alive = [contains(a1, states) for a1, _ in pairs]
        counts = [np.zeros(c, dtype=np.int64) for _ in pairs]
        for _ in range(steps):
            states = decay * states + scale * rng.standard_normal((c, n))
            for idx, (a1, a2) in enumerate(pairs):
                counts[idx] += alive[idx] & contains(a2, states)
                alive[idx] &= contains(a1, states)
        for idx in range(r):
            tot[idx] += counts[idx].sum()
            tot2[idx] += (counts[idx].astype(float) ** 2).sum()
        if r >= 2:
            d = counts[1] - counts[0]
            dtot += d.sum()
            dtot2 += (d.astype(float) ** 2).sum()
        done += c
        chunk_index += 1
    return tot, tot2, dtot, dtot2


def _occupation_estimate(total, total2, tau, steps, paths, seed) -> Estimate:
    dt = tau / steps
    mean_c = total / paths
    var_c = max(total2 / paths - mean_c * mean_c, 0.0)
    return Estimate(value=float(dt * mean_c),
                    std_error=float(dt * math.sqrt(var_c / paths)),
                    samples=paths, seed=seed)


def occupation(a1: SetExpr, a2: SetExpr, tau: float, steps: int, paths: int,
               seed: int) -> OccupationEstimate:
    """Time-discretized occupation: (tau/steps) * sum over grid times of
    the frequency of {inside A_1 strictly before, inside A_2 now}.

    Faithful to the raw functional: A_2 is not forced inside A_1.
    """
    tot, tot2, _, _ = _occupation_scan([(a1, a2)], tau, steps, paths, seed)
    est = _occupation_estimate(tot[0], tot2[0], float(tau), int(steps),
                               int(paths), check_seed(seed))
    return OccupationEstimate(horizon=float(tau), sets=(a1, a2), value=est)


def occupation_pair(pair_a, pair_b, tau, steps, paths, seed):
    """Occupation of two set pairs on identical trajectories, with the
    paired standard error of the difference (B minus A)."""
    tot, tot2, dtot, dtot2 = _occupation_scan([pair_a, pair_b], tau, steps,
                                              paths, seed)
    tau, steps, paths = float(tau), int(steps), int(paths)
    seed = check_seed(seed)
    est_a = _occupation_estimate(tot[0], tot2[0], tau, steps, paths, seed)
    est_b = _occupation_estimate(tot[1], tot2[1], tau, steps, paths, seed)
    dt = tau / steps
    mean_d = dtot / paths
    var_d = max(dtot2 / paths - mean_d * mean_d, 0.0)
    paired_se = dt * math.sqrt(var_d / paths)
    return (OccupationEstimate(tau, tuple(pair_a), est_a),
            OccupationEstimate(tau, tuple(pair_b), est_b),
            paired_se)


# ---------------------------------------------------------------------------
# semigroup
# ---------------------------------------------------------------------------

def semigroup_apply(s: SetExpr, t: float, x, samples: int,
                    seed: int) -> Estimate:
    """Heat-flow average Pr(e^{-t} x + sqrt(1-e^{-2t}) Y in s), Y standard.

    t = 0 returns exact membership; negative t is rejected.
    """
    t = float(t)
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    pt = np.asarray(x, dtype=float)
    if pt.shape != (s.dim,):
        raise ValueError(f"point must have shape ({s.dim},)")
    seed = check_seed(seed)
    if t == 0.0:
        return Estimate(value=float(contains(s, pt)), std_error=0.0,
                        samples=0, seed=seed)
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    decay = math.exp(-t)
    scale = math.sqrt(-math.expm1(-2.0 * t))
    base = decay * pt
    hits = 0
    done = 0
    batch = 0
    while done < samples:
        c = min(_CHUNK * 8, samples - done)
        rng = derive_rng(seed, "semigroup", batch)
        pts = base + scale * rng.standard_normal((c, s.dim))
        hits += int(contains(s, pts).sum())
        done += c
        batch += 1
    value = hits / samples
    se = math.sqrt(max(value * (1.0 - value), 0.0) / samples)
    return Estimate(value=float(value), std_error=se, samples=samples,
                    seed=seed)


def semigroup_halfspace_closed(c: float, t: float, u: float) -> float:
    """Exact heat-flow value on a half-space {x : nu.x <= c} at a point
    with projection u = nu.x: Phi((c - e^{-t} u) / sqrt(1 - e^{-2t})).

    The coefficient of u is minus the semigroup slope.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("time must be positive")
    scale = math.sqrt(-math.expm1(-2.0 * t))
    return float(special.ndtr((float(c) - math.exp(-t) * float(u)) / scale))


@dataclass(frozen=True)
class GradientBoundResult:
    """Max over probes of |grad quantile-transformed heat flow| divided
    by the semigroup slope; the bound predicts <= 1, with equality on
    half-spaces."""
    max_ratio: float
    ratios: tuple[float, ...]
    probes_used: int


def gradient_bound_check(s: SetExpr, t: float, probe_points: int, seed: int,
                         samples: int = 400_000, step: float = 0.05,
                         p_band: tuple[float, float] = (0.02, 0.98)
                         ) -> GradientBoundResult:
    """Finite-difference check of the gradient bound at Gaussian probes.

    Half-spaces use the closed-form heat flow (tiny step); other sets use
    Monte Carlo values with the same noise at every stencil point, so the
    differences stay smooth. Probes whose value falls outside ``p_band``
    are skipped (the quantile transform amplifies noise there); if all
    are skipped the full probe set is used.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("time must be positive")
    seed = check_seed(seed)
    kt = semigroup_slope(t)
    n = s.dim
    probes = derive_rng(seed, "probes").standard_normal((int(probe_points), n))

    def w_closed(pt):
        u = float(pt @ s.normal)
        scale = math.sqrt(-math.expm1(-2.0 * t))
        return (s.offset - math.exp(-t) * u) / scale

    ratios = []
    if isinstance(s, HalfSpace):
        h = 1e-3
        for p in probes:
            g = np.array([(w_closed(p + h * e) - w_closed(p - h * e)) / (2 * h)
                          for e in np.eye(n)])
            ratios.append(float(np.linalg.norm(g) / kt))
        used = len(ratios)
    else:
        h = float(step)
        kept = []
        for pi, p in enumerate(probes):
            probe_seed = _probe_seed(seed, pi)
            base = semigroup_apply(s, t, p, samples, probe_seed).value
            kept.append((p, probe_seed, base))
        selected = [kp for kp in kept if p_band[0] <= kp[2] <= p_band[1]]
        if not selected:
            selected = kept
        for p, probe_seed, _ in selected:
            g = np.empty(n)
            for d in range(n):
                e = np.zeros(n)
                e[d] = h
                hi = semigroup_apply(s, t, p + e, samples, probe_seed).value
                lo = semigroup_apply(s, t, p - e, samples, probe_seed).value
                wp = std_normal_quantile(np.clip(hi, 1e-9, 1 - 1e-9))
                wm = std_normal_quantile(np.clip(lo, 1e-9, 1 - 1e-9))
                g[d] = (wp - wm) / (2 * h)
            ratios.append(float(np.linalg.norm(g) / kt))
        used = len(selected)
    max_ratio = max(ratios) if ratios else float("nan")
    return GradientBoundResult(max_ratio=max_ratio, ratios=tuple(ratios),
                               probes_used=used)


def _probe_seed(seed: int, index: int) -> int:
    return int(derive_rng(seed, "probe", index).integers(0, 2**63 - 1))
