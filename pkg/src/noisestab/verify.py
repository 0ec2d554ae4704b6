"""Experiment implementations behind the verifier CLI.

Each verification compares a Monte-Carlo estimate of a set-system
functional against its parallel-half-space bound and classifies the
margin in units of the combined standard error: ``holds`` (clearly
below the bound), ``equality_band`` (within three combined standard
errors, the expected outcome for parallel half-spaces), or ``violated``
(margin below minus three, which at valid configurations can only be a
statistical or discretization artifact).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .gaussian import CorrelationMatrix, inverse_offdiag_nonpositive, \
    ou_covariance, semigroup_slope, std_normal_quantile
from .geometry import HalfSpace, SetExpr, SetSystem, contains, \
    gaussian_measure, parallel_halfspaces
from .jfunc import DERIV_HI, DERIV_LO, JQuery, hadamard_hessian, \
    hessian_top_eigenvalue, j_grad, j_value, kernel_diagnostic
from .orthant import Estimate
from .ousim import KroneckerSampler, exit_survival_pair, occupation_pair, \
    semigroup_apply
from .seeding import check_seed, derive_rng

# Verdict band: three combined standard errors with an absolute floor.
VERDICT_BAND_SES = 3.0
SE_FLOOR = 1e-6 / VERDICT_BAND_SES

HOLDS = "holds"
EQUALITY_BAND = "equality_band"
VIOLATED = "violated"

# How a violated verdict must be read at valid configurations.
VIOLATION_NOTE = ("statistical or discretization artifact -- "
                  "increase samples/steps")


@dataclass(frozen=True)
class ComparisonResult:
    """One verified inequality: lhs <= rhs up to statistical error."""
    name: str
    lhs: Estimate
    rhs: Estimate
    margin_se: float
    verdict: str


def classify_margin(margin_se: float) -> str:
    """Pure verdict rule: violated iff margin < -3 SEs, equality band iff
    |margin| <= 3 SEs, holds otherwise."""
    if margin_se < -VERDICT_BAND_SES:
        return VIOLATED
    if abs(margin_se) <= VERDICT_BAND_SES:
        return EQUALITY_BAND
    return HOLDS


def compare(name: str, lhs: Estimate, rhs: Estimate,
            paired_se: float | None = None) -> ComparisonResult:
    """Build a comparison; ``paired_se`` replaces the independent-error
    combination when the two sides share randomness."""
    if paired_se is not None:
        combined = paired_se
    else:
        combined = math.hypot(lhs.std_error, rhs.std_error)
    combined = max(combined, SE_FLOOR)
    margin = (rhs.value - lhs.value) / combined
    return ComparisonResult(name=name, lhs=lhs, rhs=rhs,
                            margin_se=float(margin),
                            verdict=classify_margin(margin))


def comparison_dict(c: ComparisonResult) -> dict:
    from .report import estimate_dict
    d = {"name": c.name, "lhs": estimate_dict(c.lhs),
         "rhs": estimate_dict(c.rhs), "margin_se": c.margin_se,
         "verdict": c.verdict}
    if c.verdict == VIOLATED:
        d["note"] = VIOLATION_NOTE
    return d


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def joint_containment(sets: SetSystem, m: CorrelationMatrix, samples: int,
                      seed: int) -> Estimate:
    """Monte-Carlo frequency of {X_i in A_i for every i} under the
    Kronecker-structured joint law."""
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    seed = check_seed(seed)
    sampler = KroneckerSampler(m, sets.dim)
    hits = 0
    done = 0
    batch = 0
    chunk = 1 << 17
    while done < samples:
        c = min(chunk, samples - done)
        draws = sampler.sample(c, _subseed(seed, "joint", batch))
        inside = np.ones(c, dtype=bool)
        for i, s in enumerate(sets.sets):
            inside &= contains(s, draws[:, i, :])
        hits += int(inside.sum())
        done += c
        batch += 1
    value = hits / samples
    se = math.sqrt(max(value * (1.0 - value), 0.0) / samples)
    return Estimate(value=float(value), std_error=se, samples=samples,
                    seed=seed)


def _subseed(seed: int, *key) -> int:
    return int(derive_rng(seed, *key).integers(0, 2**63 - 1))


def stability_bound(sets: SetSystem, m: CorrelationMatrix, samples: int,
                    target_se: float, seed: int) -> tuple[Estimate, list[Estimate]]:
    """The half-space bound J(measures; M), with measure noise propagated
    through the gradient to first order."""
    measures = [gaussian_measure(s, samples, _subseed(seed, "measure", i))
                for i, s in enumerate(sets.sets)]
    x = np.array([mu.value for mu in measures])
    jq = JQuery(np.clip(x, 0.0, 1.0), m)
    est = j_value(jq, target_se, _subseed(seed, "bound"))
    var = est.std_error ** 2
    if any(mu.std_error > 0.0 for mu in measures):
        interior = JQuery(np.clip(x, DERIV_LO, DERIV_HI), m)
        for i, mu in enumerate(measures):
            if mu.std_error > 0.0:
                g = j_grad(interior, i, target_se, _subseed(seed, "propag", i))
                var += (g.value * mu.std_error) ** 2
    rhs = Estimate(value=est.value, std_error=math.sqrt(var),
                   samples=est.samples, seed=seed, cap_hit=est.cap_hit)
    return rhs, measures


def _require_hypothesis(m: CorrelationMatrix):
    if not m.nonnegative:
        raise ConfigError(
            "correlation matrix has a negative entry; the half-space bound "
            "is only claimed for entrywise-nonnegative matrices")


def _matched_halfspaces(sets: SetSystem, measures) -> list[HalfSpace]:
    direction = np.zeros(sets.dim)
    direction[0] = 1.0
    return parallel_halfspaces([mu.value for mu in measures], direction)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def verify_main_inequality(cfg: ExperimentConfig) -> list[ComparisonResult]:
    """Joint containment under M against the J bound at the measures."""
    m = cfg.matrix.build()
    _require_hypothesis(m)
    if not cfg.sets:
        raise ConfigError("[sets]: verify-main needs one set per coordinate")
    sets = SetSystem(tuple(cfg.sets))
    if sets.k != m.k:
        raise ConfigError(f"[sets]: {sets.k} sets for a {m.k}-dimensional "
                          "matrix")
    s = cfg.sampling
    lhs = joint_containment(sets, m, s.samples, s.seed)
    rhs, _ = stability_bound(sets, m, s.samples, s.target_se, s.seed)
    return [compare("main-inequality", lhs, rhs)]


def verify_noise_stability(a1: SetExpr, a2: SetExpr, t: float,
                           cfg: ExperimentConfig) -> list[ComparisonResult]:
    """Two-set specialization at correlation e^{-t}."""
    if not float(t) > 0.0:
        raise ConfigError("[experiment] t: noise stability needs t > 0")
    rho = math.exp(-float(t))
    m = CorrelationMatrix.equicorrelated(2, rho)
    sets = SetSystem((a1, a2))
    s = cfg.sampling
    lhs = joint_containment(sets, m, s.samples, s.seed)
    rhs, _ = stability_bound(sets, m, s.samples, s.target_se, s.seed)
    return [compare(f"noise-stability[t={t:g}]", lhs, rhs)]


def verify_exit_dominance(a: SetExpr, taus, cfg: ExperimentConfig
                          ) -> list[ComparisonResult]:
    """Grid-survival of A against the matched half-space, per horizon,
    with common random numbers."""
    s = cfg.sampling
    mu = gaussian_measure(a, s.samples, _subseed(s.seed, "measure", 0))
    b = _matched_halfspaces(SetSystem((a,)), [mu])[0]
    out = []
    for tau in taus:
        est_a, est_b, paired = exit_survival_pair(a, b, tau, cfg.grid.steps,
                                                  s.paths, s.seed)
        out.append(compare(f"exit-dominance[tau={tau:g}]",
                           est_a.survival, est_b.survival,
                           paired_se=max(paired, 0.0)))
    return out


def verify_occupation(a1: SetExpr, a2: SetExpr, tau: float,
                      cfg: ExperimentConfig) -> list[ComparisonResult]:
    """Occupation of (A_1, A_2) against matched parallel half-spaces."""
    s = cfg.sampling
    mus = [gaussian_measure(a, s.samples, _subseed(s.seed, "measure", i))
           for i, a in enumerate((a1, a2))]
    b1, b2 = _matched_halfspaces(SetSystem((a1, a2)), mus)
    occ_a, occ_b, paired = occupation_pair((a1, a2), (b1, b2), tau,
                                           cfg.grid.steps, s.paths, s.seed)
    return [compare(f"occupation[tau={tau:g}]", occ_a.value, occ_b.value,
                    paired_se=max(paired, 0.0))]


@dataclass(frozen=True)
class EqualityDiagnostic:
    """Linearity diagnostic of the quantile-transformed heat flow.

    For each set: fitted direction, offset, RMS nonlinearity residual and
    fitted slope magnitude; plus pairwise cosines between directions.
    Parallel half-spaces give residuals near zero, aligned directions,
    and slope equal to the semigroup slope.
    """
    directions: np.ndarray
    offsets: np.ndarray
    residuals: np.ndarray
    slopes: np.ndarray
    cosines: np.ndarray
    probes_used: np.ndarray


def equality_diagnostic_run(sets: SetSystem, t: float,
                            cfg: ExperimentConfig) -> EqualityDiagnostic:
    if not float(t) > 0.0:
        raise ConfigError("[experiment] t: equality diagnostic needs t > 0")
    s = cfg.sampling
    for i, a in enumerate(sets.sets):
        mu = gaussian_measure(a, s.samples, _subseed(s.seed, "measure", i))
        if not 0.0 < mu.value < 1.0:
            raise ConfigError(f"[sets] a{i + 1}: measure must be interior "
                              "to (0, 1) for the diagnostic")
    n = sets.dim
    probes = derive_rng(s.seed, "diagnostic").standard_normal((s.probes, n))
    decay = math.exp(-float(t))
    scale = math.sqrt(-math.expm1(-2.0 * float(t)))

    directions = np.zeros((sets.k, n))
    offsets = np.zeros(sets.k)
    residuals = np.zeros(sets.k)
    slopes = np.zeros(sets.k)
    used = np.zeros(sets.k, dtype=int)
    for i, a in enumerate(sets.sets):
        if isinstance(a, HalfSpace):
            u = probes @ a.normal
            w = (a.offset - decay * u) / scale
            keep = np.ones(probes.shape[0], dtype=bool)
        else:
            vals = np.array([
                semigroup_apply(a, t, p, s.samples,
                                _subseed(s.seed, "flow", j)).value
                for j, p in enumerate(probes)])
            keep = (vals >= 0.01) & (vals <= 0.99)
            if not keep.any():
                keep = np.ones(probes.shape[0], dtype=bool)
            w = std_normal_quantile(np.clip(vals[keep], 1e-9, 1 - 1e-9))
        pts = probes[keep]
        design = np.hstack([pts, np.ones((pts.shape[0], 1))])
        coef, *_ = np.linalg.lstsq(design, w, rcond=None)
        fit = design @ coef
        directions[i] = coef[:n]
        offsets[i] = coef[n]
        residuals[i] = math.sqrt(float(np.mean((w - fit) ** 2)))
        slopes[i] = float(np.linalg.norm(coef[:n]))
        used[i] = int(keep.sum())

    cosines = np.eye(sets.k)
    for i in range(sets.k):
        for j in range(i + 1, sets.k):
            ni, nj = np.linalg.norm(directions[i]), np.linalg.norm(directions[j])
            c = float(directions[i] @ directions[j] / (ni * nj)) \
                if ni > 0 and nj > 0 else 0.0
            cosines[i, j] = cosines[j, i] = c
    return EqualityDiagnostic(directions=directions, offsets=offsets,
                              residuals=residuals, slopes=slopes,
                              cosines=cosines, probes_used=used)


def hessian_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Rows of (x, matrix, top eigenvalue of the weighted Hessian, SE)."""
    s = cfg.sampling
    matrices = []
    if cfg.matrix.kind == "equicorrelated" and cfg.sweep.rhos:
        for rho in cfg.sweep.rhos:
            matrices.append((f"equicorrelated(k={cfg.matrix.k}, rho={rho:g})",
                             CorrelationMatrix.equicorrelated(cfg.matrix.k, rho)))
    else:
        m = cfg.matrix.build()
        matrices.append((cfg.matrix.kind, m))
    for _, m in matrices:
        _require_hypothesis(m)
        if not m.is_strictly_pd():
            raise ConfigError("[matrix]: sweep needs strictly PD matrices")

    rows = []
    for label, m in matrices:
        if cfg.sweep.random_x > 0:
            rng = derive_rng(s.seed, "sweep-x", m.k)
            xs = rng.uniform(0.05, 0.95, size=(cfg.sweep.random_x, m.k))
        else:
            axes = np.meshgrid(*([np.asarray(cfg.sweep.x_axis)] * m.k),
                               indexing="ij")
            xs = np.stack([a.ravel() for a in axes], axis=1)
        for idx, x in enumerate(xs):
            ev = hadamard_hessian(JQuery(x, m), s.target_se,
                                  _subseed(s.seed, "sweep", idx))
            lam, lam_se = hessian_top_eigenvalue(ev)
            diag = kernel_diagnostic(ev)
            rows.append({
                "name": f"hessian[{label}][{idx}]",
                "x": [float(v) for v in x],
                "matrix": label,
                "max_eigenvalue": lam,
                "se": lam_se,
                "kernel_alignment": diag.kernel_alignment
                if diag.applicable else None,
            })
    return rows


_WITNESS_ENTRYWISE_ONLY = [[1.0, 0.7, 0.7], [0.7, 1.0, 0.0], [0.7, 0.0, 1.0]]


def condition_check(cfg: ExperimentConfig) -> list[dict]:
    """Compare the two positivity hypotheses on random time-grid
    covariances, plus the explicit witness separating them.

    Exponential-decay grids satisfy both. The witness satisfies the
    entrywise condition but not the inverse condition. A witness for the
    reverse separation is not constructed here: strictly PD matrices
    whose inverses have nonpositive off-diagonals appear to be
    entrywise nonnegative at this scale, and the rows only report.
    """
    s = cfg.sampling
    rng = derive_rng(s.seed, "condition")
    rows = []
    for g in range(cfg.sweep.grids):
        k = int(rng.integers(2, cfg.sweep.k_max + 1))
        times = np.cumsum(rng.uniform(0.05, 1.0, size=k))
        times[0] = 0.0
        m = ou_covariance(times)
        rows.append({
            "name": f"condition[grid-{g}]",
            "times": [float(t) for t in times],
            "entrywise_nonnegative": bool(m.nonnegative),
            "inverse_offdiag_nonpositive": bool(inverse_offdiag_nonpositive(m)),
        })
    witness = CorrelationMatrix(np.array(_WITNESS_ENTRYWISE_ONLY))
    rows.append({
        "name": "condition[witness]",
        "rows": _WITNESS_ENTRYWISE_ONLY,
        "entrywise_nonnegative": bool(witness.nonnegative),
        "inverse_offdiag_nonpositive": bool(inverse_offdiag_nonpositive(witness)),
        "note": "entrywise condition holds, inverse condition fails; "
                "no reverse witness is attempted",
    })
    return rows


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentOutput:
    results: list[dict]
    csv_columns: list[str]
    csv_rows: list[list]
    comparisons: list[ComparisonResult]


def _comparisons_output(comparisons: list[ComparisonResult]) -> ExperimentOutput:
    results = [comparison_dict(c) for c in comparisons]
    columns = ["name", "lhs", "lhs_se", "rhs", "rhs_se", "margin_se",
               "verdict"]
    rows = [[c.name, c.lhs.value, c.lhs.std_error, c.rhs.value,
             c.rhs.std_error, c.margin_se, c.verdict] for c in comparisons]
    return ExperimentOutput(results, columns, rows, comparisons)


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    kind = cfg.kind
    if kind == "verify-main":
        return _comparisons_output(verify_main_inequality(cfg))
    if kind == "noise-stability":
        if len(cfg.sets) != 2:
            raise ConfigError("[sets]: noise-stability needs exactly a1, a2")
        return _comparisons_output(
            verify_noise_stability(cfg.sets[0], cfg.sets[1], cfg.t, cfg))
    if kind == "exit-time":
        if len(cfg.sets) != 1:
            raise ConfigError("[sets]: exit-time needs exactly a1")
        comps = verify_exit_dominance(cfg.sets[0], cfg.grid.taus, cfg)
        out = _comparisons_output(comps)
        columns = ["tau", "survival_lhs", "survival_rhs", "lhs_se", "rhs_se",
                   "margin_se", "verdict"]
        rows = [[tau, c.lhs.value, c.rhs.value, c.lhs.std_error,
                 c.rhs.std_error, c.margin_se, c.verdict]
                for tau, c in zip(cfg.grid.taus, comps)]
        return ExperimentOutput(out.results, columns, rows, comps)
    if kind == "occupation":
        if len(cfg.sets) != 2:
            raise ConfigError("[sets]: occupation needs exactly a1, a2")
        comps = verify_occupation(cfg.sets[0], cfg.sets[1],
                                  cfg.grid.taus[0], cfg)
        return _comparisons_output(comps)
    if kind == "hessian-sweep":
        rows = hessian_sweep(cfg)
        columns = ["name", "x", "max_eigenvalue", "se"]
        csv_rows = [[r["name"], ";".join(f"{v:.17g}" for v in r["x"]),
                     r["max_eigenvalue"], r["se"]] for r in rows]
        return ExperimentOutput(rows, columns, csv_rows, [])
    if kind == "equality-diagnostic":
        if not cfg.sets:
            raise ConfigError("[sets]: equality-diagnostic needs at least a1")
        diag = equality_diagnostic_run(SetSystem(tuple(cfg.sets)), cfg.t, cfg)
        kt = semigroup_slope(cfg.t)
        results = []
        for i in range(len(cfg.sets)):
            results.append({
                "name": f"equality-diagnostic[a{i + 1}]",
                "direction": [float(v) for v in diag.directions[i]],
                "offset": float(diag.offsets[i]),
                "residual": float(diag.residuals[i]),
                "slope": float(diag.slopes[i]),
                "slope_over_kt": float(diag.slopes[i] / kt),
                "probes_used": int(diag.probes_used[i]),
            })
        results.append({
            "name": "equality-diagnostic[cosines]",
            "cosines": [[float(v) for v in row] for row in diag.cosines],
        })
        columns = ["name", "residual", "slope", "slope_over_kt"]
        csv_rows = [[r["name"], r["residual"], r["slope"], r["slope_over_kt"]]
                    for r in results if "residual" in r]
        return ExperimentOutput(results, columns, csv_rows, [])
    if kind == "condition-check":
        rows = condition_check(cfg)
        columns = ["name", "entrywise_nonnegative",
                   "inverse_offdiag_nonpositive"]
        csv_rows = [[r["name"], r["entrywise_nonnegative"],
                     r["inverse_offdiag_nonpositive"]] for r in rows]
        return ExperimentOutput(rows, columns, csv_rows, [])
    raise ConfigError(f"[experiment] kind: unknown experiment {kind!r}")


def exit_code_for(comparisons: list[ComparisonResult]) -> int:
    """0 when every verdict holds or sits in the equality band, 2 when
    any comparison is violated."""
    return 2 if any(c.verdict == VIOLATED for c in comparisons) else 0
