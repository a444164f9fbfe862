"""Difference-in-differences estimators for worker-year panels.

The module covers the estimating equations used throughout the study:
two-way fixed-effects DiD on log wages, a doubly robust variant that
reweights by an inverse propensity score fitted on pre-determined worker
characteristics, an event-study expansion around a reference year,
linear probability models for retention and occupation switching, a
pooled cross-section regression with a continuous exposure measure, and
placebo suites in space and in time.

All variance estimates are cluster robust (CR0 sandwich with the usual
small-sample factor), clustered at the municipality level by default and
at the state level for the pooled exposure design. Fixed effects are
absorbed by weighted alternating projections rather than dummy columns,
and the absorbed degrees of freedom enter every small-sample correction
through a connected-components count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np
import scipy.special

from .numerics import WlsProblem, wls_solve, logit_fit, LogitFit
from .panel import (
    EDUCATION_LEVELS,
    DesignMatrix,
    Panel,
    _dummies,
    build_design,
    nearest_rank_quantile,
    two_way_demean,
)

#: Worker characteristics used for the propensity score, all measured at
#: the worker's first observed year so they are pre-determined.
DEFAULT_PROPENSITY_COVARIATES = (
    "female",
    "race",
    "age",
    "age_sq",
    "tenure",
    "tenure_sq",
    "education",
)

_FAMILIES = ("twfe", "doubly_robust", "event_study", "linear_probability", "pooled_ols")


class EstimationError(ValueError):
    """An estimating equation cannot be formed on the given panel."""


@dataclass(frozen=True)
class EstimationSpec:
    """Declarative description of one estimating equation.

    Parameters
    ----------
    outcome : str
        ``"log_wage"`` or ``"retained"``; estimators with derived
        outcomes (the mover flag) override this internally.
    treatment : str
        ``"binary"`` for the treated-state post indicator,
        ``"continuous"`` for the municipal exposure ratio in
        percentage points.
    family : str
        One of ``twfe``, ``doubly_robust``, ``event_study``,
        ``linear_probability``, ``pooled_ols``.
    fixed_effects : tuple of str
        Absorption dimensions, at most two of ``worker``, ``year``,
        ``state``.
    cluster : str
        ``"municipality"`` or ``"state"``.
    propensity_covariates : tuple of str
        Worker covariates for the propensity score (doubly robust only).
    trim_quantile : float
        Rows whose inverse propensity weight lies strictly above this
        nearest-rank quantile of the weight distribution are dropped.
    reference_year : int
        Omitted year of the event-study expansion.
    interactions : str or None
        Name of a 0/1 panel column to interact with the treatment
        (pooled designs), entering both in level and interacted.
    """

    outcome: str = "log_wage"
    treatment: str = "binary"
    family: str = "twfe"
    fixed_effects: tuple[str, ...] = ("worker", "year")
    cluster: str = "municipality"
    propensity_covariates: tuple[str, ...] = DEFAULT_PROPENSITY_COVARIATES
    trim_quantile: float = 0.9975
    reference_year: int = 2013
    interactions: str | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise EstimationError(f"unknown family {self.family!r}, expected one of {_FAMILIES}")
        if self.treatment not in ("binary", "continuous"):
            raise EstimationError(f"treatment must be binary or continuous, got {self.treatment!r}")
        if self.cluster not in ("municipality", "state"):
            raise EstimationError(f"cluster must be municipality or state, got {self.cluster!r}")
        if not (0.5 < self.trim_quantile <= 1.0):
            raise EstimationError(f"trim_quantile must lie in (0.5, 1], got {self.trim_quantile}")
        if len(self.fixed_effects) > 2:
            raise EstimationError("at most two fixed-effect dimensions are supported")


@dataclass(frozen=True)
class EstimateResult:
    """Point estimates with cluster-robust inference and fit diagnostics.

    ``coefficients`` and ``std_errors`` are keyed by regressor name.
    ``r2_adjusted`` uses the original (pre-absorption) outcome and
    counts absorbed fixed effects in the degrees of freedom, as does
    ``rmse``. ``diagnostics`` holds scalar bookkeeping such as the
    number of demeaning sweeps and singleton clusters.
    """

    coefficients: Mapping[str, float]
    std_errors: Mapping[str, float]
    n_obs: int
    n_clusters: int
    r2_adjusted: float
    rmse: float
    diagnostics: Mapping[str, object]

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[name])

    def std_error(self, name: str) -> float:
        return float(self.std_errors[name])

    def t_statistic(self, name: str) -> float:
        return self.coefficient(name) / self.std_error(name)

    def p_value(self, name: str) -> float:
        """Two-sided p-value under a normal approximation."""
        return float(2.0 * scipy.special.ndtr(-abs(self.t_statistic(name))))

    def confidence_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        """Normal-approximation confidence interval."""
        if not (0.0 < level < 1.0):
            raise EstimationError(f"confidence level must lie in (0, 1), got {level}")
        z = float(scipy.special.ndtri(0.5 + level / 2.0))
        c, s = self.coefficient(name), self.std_error(name)
        return (c - z * s, c + z * s)


def _connected_components(codes_a: np.ndarray, codes_b: np.ndarray, size_a: int, size_b: int) -> int:
    """Components of the bipartite group graph linked by observations."""
    parent = list(range(size_a + size_b))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(codes_a.tolist(), codes_b.tolist()):
        ra, rb = find(a), find(size_a + b)
        if ra != rb:
            parent[rb] = ra
    return len({find(i) for i in range(size_a + size_b)})


def absorbed_degrees_of_freedom(design: DesignMatrix) -> int:
    """Rank of the absorbed fixed-effect block, grand mean included.

    One dimension absorbs as many degrees of freedom as it has groups;
    two dimensions absorb the sum of their group counts minus the number
    of connected components of the bipartite graph the observations
    induce (each component carries one redundant level).
    """
    sizes = design.fe_sizes
    if len(sizes) == 0:
        return 0
    if len(sizes) == 1:
        return sizes[0]
    return sizes[0] + sizes[1] - _connected_components(
        design.fe_codes[0], design.fe_codes[1], sizes[0], sizes[1]
    )


def sandwich_components(
    regressors: np.ndarray,
    residuals: np.ndarray,
    weights: np.ndarray,
    clusters: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pieces of the clustered sandwich: X'WX, the meat, and the scores.

    The score of cluster g is the weighted sum of ``w_i e_i x_i`` over
    its rows; the meat is the outer-product sum of those scores.
    """
    xw = regressors * weights[:, None]
    bread_inner = regressors.T @ xw
    n_clusters = int(clusters.max()) + 1
    scores = np.zeros((n_clusters, regressors.shape[1]))
    np.add.at(scores, clusters, regressors * (weights * residuals)[:, None])
    meat = scores.T @ scores
    return bread_inner, meat, scores


def cluster_robust_se(
    regressors: np.ndarray,
    residuals: np.ndarray,
    weights: np.ndarray,
    clusters: np.ndarray,
    k_total: int,
) -> tuple[np.ndarray, np.ndarray]:
    """CR0 cluster-robust standard errors with the usual finite-G factor.

    The variance is ``c * inv(X'WX) M inv(X'WX)`` with
    ``c = G/(G-1) * (n-1)/(n-k_total)``, where ``k_total`` counts both
    the explicit regressors and the absorbed fixed effects.

    Returns
    -------
    (se, vcov) : tuple of ndarray
        Standard errors per column and the full variance matrix.
    """
    n = residuals.shape[0]
    n_clusters = int(clusters.max()) + 1
    if n_clusters < 2:
        raise EstimationError("clustered variance needs at least two clusters")
    if n - k_total <= 0:
        raise EstimationError(
            f"no residual degrees of freedom: n={n}, parameters={k_total}"
        )
    bread_inner, meat, _ = sandwich_components(regressors, residuals, weights, clusters)
    factor = (n_clusters / (n_clusters - 1.0)) * ((n - 1.0) / (n - k_total))
    half = np.linalg.solve(bread_inner, meat)
    vcov = factor * np.linalg.solve(bread_inner, half.T).T
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    return se, vcov


def fit_design(
    design: DesignMatrix, family: str, extra_diagnostics: Mapping[str, object] | None = None
) -> EstimateResult:
    """Absorb fixed effects, solve the weighted least squares, infer.

    This is the shared backend of every estimator in the module. The
    design must declare at least one fixed-effect dimension; designs
    without absorption would need an explicit intercept column and no
    built-in estimating equation is specified that way.
    """
    if len(design.fe_codes) == 0:
        raise EstimationError("fit_design requires at least one fixed-effect dimension")
    demeaned = two_way_demean(design)
    solution = wls_solve(WlsProblem(demeaned.regressors, demeaned.outcome, design.weights))
    residuals = solution.residuals

    absorbed = absorbed_degrees_of_freedom(design)
    k_total = len(design.names) + absorbed
    n = design.n_obs
    dof = n - k_total
    if dof <= 0:
        raise EstimationError(f"no residual degrees of freedom: n={n}, parameters={k_total}")

    se, _ = cluster_robust_se(
        demeaned.regressors, residuals, design.weights, design.clusters, k_total
    )

    # fit statistics on the demeaned (within) regression, with absorbed
    # fixed effects counted in the degrees of freedom
    w = design.weights
    y = demeaned.outcome
    ybar = float(np.sum(w * y) / np.sum(w))
    tss = float(np.sum(w * (y - ybar) ** 2))
    rss = float(np.sum(w * residuals**2))
    r2 = 1.0 - rss / tss if tss > 0.0 else float("nan")
    r2_adjusted = 1.0 - (1.0 - r2) * (n - 1.0) / dof
    rmse = float(np.sqrt(rss / dof))

    cluster_sizes = np.bincount(design.clusters)
    singletons = int(np.sum(cluster_sizes == 1))
    if singletons:
        warnings.warn(
            f"{singletons} cluster(s) contain a single observation; "
            "clustered standard errors may be unreliable",
            UserWarning,
            stacklevel=2,
        )
    diagnostics: dict[str, object] = {
        "family": family,
        "absorbed_df": absorbed,
        "dof_residual": dof,
        "demean_iterations": demeaned.demean_iterations,
        "singleton_clusters": singletons,
        "weighted_demeaning": bool(np.ptp(design.weights) > 0.0),
        "fixed_effects": "+".join(design.fe_names),
    }
    if extra_diagnostics:
        diagnostics.update(extra_diagnostics)
    return EstimateResult(
        coefficients=dict(zip(design.names, (float(b) for b in solution.coefficients))),
        std_errors=dict(zip(design.names, (float(s) for s in se))),
        n_obs=n,
        n_clusters=design.n_clusters,
        r2_adjusted=float(r2_adjusted),
        rmse=rmse,
        diagnostics=diagnostics,
    )


def twfe_did(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Two-way fixed effects DiD: log wage on the treated-post indicator.

    Worker and year effects are absorbed; standard errors cluster at
    the municipality level. The treatment column can be switched to the
    continuous exposure measure through the spec.
    """
    spec = replace(spec, family="twfe") if spec is not None else EstimationSpec()
    design = build_design(panel, spec)
    return fit_design(design, "twfe")


def _worker_first_rows(panel: Panel) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Worker codes, index of each worker's earliest observed row, labels."""
    labels_arr, codes = np.unique(panel.column("worker_id"), return_inverse=True)
    codes = codes.astype(np.int64)
    years = panel.column("year")
    order = np.lexsort((years, codes))
    _, first_pos = np.unique(codes[order], return_index=True)
    first_rows = order[first_pos]
    return codes, first_rows, tuple(str(x) for x in labels_arr.tolist())


@dataclass(frozen=True)
class PropensityResult:
    """Inverse propensity weights and the logistic fit that produced them.

    ``row_weights`` broadcasts the worker-level weight (1/p for treated
    workers, 1/(1-p) for controls) to every worker-year row.
    """

    row_weights: np.ndarray
    worker_propensity: np.ndarray
    worker_treated: np.ndarray
    worker_codes: np.ndarray
    covariate_names: tuple[str, ...]
    fit: LogitFit


def propensity_weights(
    panel: Panel, covariates: tuple[str, ...] = DEFAULT_PROPENSITY_COVARIATES
) -> PropensityResult:
    """Fit the treated-state propensity on first-observed covariates.

    The score is a logistic regression of the worker's (time-invariant)
    treated-state membership on characteristics taken from the worker's
    first observed year, so no post-treatment variation enters. Weights
    target the average treatment effect.
    """
    codes, first_rows, _ = _worker_first_rows(panel)
    n_workers = first_rows.shape[0]
    treated_rows = (panel.column("state") == panel.treated_state).astype(np.int64)
    per_worker_min = np.full(n_workers, 2, dtype=np.int64)
    per_worker_max = np.full(n_workers, -1, dtype=np.int64)
    np.minimum.at(per_worker_min, codes, treated_rows)
    np.maximum.at(per_worker_max, codes, treated_rows)
    if np.any(per_worker_min != per_worker_max):
        raise EstimationError(
            "worker treated-state membership must be time invariant for the propensity score"
        )
    worker_treated = per_worker_min.astype(float)

    columns: list[np.ndarray] = [np.ones(n_workers)]
    names: list[str] = ["intercept"]
    for cov in covariates:
        values = panel.column(cov)[first_rows]
        if cov in ("race", "education"):
            levels = EDUCATION_LEVELS if cov == "education" else None
            cols, col_names = _dummies(values, cov, levels)
            columns.extend(cols)
            names.extend(col_names)
        else:
            columns.append(np.asarray(values, dtype=float))
            names.append(cov)
    design = np.column_stack(columns)
    fit = logit_fit(design, worker_treated)
    propensity = scipy.special.expit(design @ fit.coefficients)
    worker_weights = np.where(worker_treated == 1.0, 1.0 / propensity, 1.0 / (1.0 - propensity))
    return PropensityResult(
        row_weights=worker_weights[codes],
        worker_propensity=propensity,
        worker_treated=worker_treated,
        worker_codes=codes,
        covariate_names=tuple(names),
        fit=fit,
    )


def trim_mask(weights: np.ndarray, quantile: float) -> tuple[np.ndarray, float]:
    """Keep mask after dropping weights strictly above a nearest-rank quantile.

    Returns the mask and the threshold actually applied. Rows equal to
    the threshold are kept, so at least one row always survives.
    """
    threshold = nearest_rank_quantile(np.asarray(weights, dtype=float), quantile)
    return np.asarray(weights) <= threshold, float(threshold)


def doubly_robust_did(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Propensity-weighted two-way fixed effects DiD.

    Three steps: fit the worker-level propensity score on pre-determined
    covariates, trim rows with extreme inverse propensity weights, then
    run the weighted TWFE regression where both the absorption and the
    least squares use the weights. Consistent if either the propensity
    model or the outcome model is right.
    """
    spec = spec if spec is not None else EstimationSpec(family="doubly_robust")
    if spec.treatment != "binary":
        raise EstimationError("the doubly robust estimator requires the binary treatment")
    prop = propensity_weights(panel, spec.propensity_covariates)
    keep, threshold = trim_mask(prop.row_weights, spec.trim_quantile)
    trimmed = int(keep.shape[0] - int(keep.sum()))
    sub = panel.subset(keep)
    weights = prop.row_weights[keep]
    design = build_design(sub, replace(spec, family="twfe"), weights=weights)
    extra = {
        "propensity_iterations": prop.fit.iterations,
        "propensity_converged": prop.fit.converged,
        "trimmed_rows": trimmed,
        "weight_threshold": threshold,
        "max_weight": float(weights.max()),
        "min_propensity": float(prop.worker_propensity.min()),
        "max_propensity": float(prop.worker_propensity.max()),
    }
    return fit_design(design, "doubly_robust", extra)


def event_study(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Year-by-year treated-state effects around a reference year.

    One coefficient ``effect_YYYY`` per calendar year except the
    reference year, which is normalized to zero. Pre-treatment
    coefficients measure differential trends; post-treatment ones trace
    the dynamic effect.
    """
    spec = (
        replace(spec, family="event_study")
        if spec is not None
        else EstimationSpec(family="event_study")
    )
    if spec.reference_year not in panel.years.tolist():
        raise EstimationError(
            f"reference year {spec.reference_year} is not observed in the panel"
        )
    design = build_design(panel, spec)
    return fit_design(design, "event_study")


def event_study_post_mean(result: EstimateResult, treatment_year: int) -> float:
    """Average of the post-treatment event-study coefficients."""
    post = [
        value
        for name, value in result.coefficients.items()
        if name.startswith("effect_") and int(name.split("_")[1]) >= treatment_year
    ]
    if not post:
        raise EstimationError("no post-treatment coefficients in the event study")
    return float(np.mean(post))


def retention_lpm(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Linear probability model for year-to-year job retention."""
    if spec is None:
        spec = EstimationSpec(outcome="retained", family="linear_probability")
    else:
        spec = replace(spec, outcome="retained", family="linear_probability")
    design = build_design(panel, spec)
    return fit_design(design, "linear_probability")


def mover_outcome(panel: Panel) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative exposed-to-unexposed occupation switch flag.

    Walking each worker's observed rows in year order, the flag turns on
    at the first row whose occupation is unexposed while the previous
    observed row's occupation was exposed, and stays on afterwards.

    Returns
    -------
    (outcome, eligible) : tuple of ndarray
        Row-level 0/1 outcome and a row mask selecting workers whose
        first observed occupation was exposed (the population at risk).
    """
    codes, first_rows, _ = _worker_first_rows(panel)
    years = panel.column("year")
    exposed = panel.column("exposed_occupation").astype(np.int64)
    n = len(panel)
    order = np.lexsort((years, codes))
    outcome = np.zeros(n)
    switched = np.zeros(first_rows.shape[0], dtype=bool)
    prev_exposed = np.zeros(first_rows.shape[0], dtype=np.int64)
    seen = np.zeros(first_rows.shape[0], dtype=bool)
    for idx in order.tolist():
        w = codes[idx]
        if seen[w] and prev_exposed[w] == 1 and exposed[idx] == 0:
            switched[w] = True
        outcome[idx] = 1.0 if switched[w] else 0.0
        prev_exposed[w] = exposed[idx]
        seen[w] = True
    eligible = (exposed[first_rows] == 1)[codes]
    return outcome, eligible


def mover_lpm(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Linear probability model for switching out of exposed occupations.

    The sample is restricted to workers whose first observed occupation
    was exposed; the outcome is the cumulative switch flag from
    :func:`mover_outcome`.
    """
    outcome, eligible = mover_outcome(panel)
    if not np.any(eligible):
        raise EstimationError("no workers start in an exposed occupation")
    sub = panel.subset(eligible)
    if spec is None:
        spec = EstimationSpec(family="linear_probability")
    else:
        spec = replace(spec, family="linear_probability")
    design = build_design(sub, spec, outcome_override=outcome[eligible])
    return fit_design(design, "linear_probability", {"eligible_rows": int(eligible.sum())})


def pooled_ols_did(panel: Panel, spec: EstimationSpec | None = None) -> EstimateResult:
    """Pooled exposure regression with demographic controls.

    Log wage on the municipal exposure ratio (percentage points) plus
    gender, race, education, and a quadratic in age, absorbing state and
    year effects, clustered by state. An ``interactions`` column in the
    spec adds the flag and its product with the exposure measure.
    """
    if spec is None:
        spec = EstimationSpec(
            treatment="continuous",
            family="pooled_ols",
            fixed_effects=("state", "year"),
            cluster="state",
        )
    else:
        spec = replace(spec, family="pooled_ols")
    design = build_design(panel, spec)
    return fit_design(design, "pooled_ols")


def heterogeneity_split(
    panel: Panel,
    dimension: str,
    spec: EstimationSpec | None = None,
    estimator: Callable[[Panel, EstimationSpec | None], EstimateResult] | None = None,
) -> dict[str, EstimateResult]:
    """Re-estimate an equation on subsamples of one worker characteristic.

    Supported dimensions: ``education`` (one estimate per level),
    ``exposed_activity`` and ``exposed_occupation`` (exposed versus
    unexposed, the occupation flag taken at the worker's first observed
    year so the split is pre-determined), and ``informal`` when the
    panel carries that column. When an informal column is present the
    education and exposure splits run on formal rows only, so the
    informal segment is reported exactly once.

    Empty cells are skipped rather than raised, so thin panels degrade
    gracefully.
    """
    estimator = estimator if estimator is not None else twfe_did
    n = len(panel)
    formal = np.ones(n, dtype=bool)
    if panel.has_informal:
        formal = panel.column("informal").astype(np.int64) == 0

    cells: list[tuple[str, np.ndarray]] = []
    if dimension == "education":
        education = panel.column("education")
        for level in EDUCATION_LEVELS:
            cells.append((level, (education == level) & formal))
    elif dimension == "exposed_activity":
        flag = panel.column("exposed_activity").astype(np.int64)
        cells.append(("exposed", (flag == 1) & formal))
        cells.append(("unexposed", (flag == 0) & formal))
    elif dimension == "exposed_occupation":
        codes, first_rows, _ = _worker_first_rows(panel)
        first_flag = panel.column("exposed_occupation").astype(np.int64)[first_rows]
        row_flag = first_flag[codes]
        cells.append(("exposed", (row_flag == 1) & formal))
        cells.append(("unexposed", (row_flag == 0) & formal))
    elif dimension == "informal":
        if not panel.has_informal:
            raise EstimationError("panel has no informal column to split on")
        flag = panel.column("informal").astype(np.int64)
        cells.append(("informal", flag == 1))
        cells.append(("formal", flag == 0))
    else:
        raise EstimationError(f"unknown heterogeneity dimension {dimension!r}")

    out: dict[str, EstimateResult] = {}
    for label, mask in cells:
        if not np.any(mask):
            continue
        out[label] = estimator(panel.subset(mask), spec)
    return out


def placebo_suite(
    panel: Panel,
    mode: str,
    spec: EstimationSpec | None = None,
) -> dict[str, EstimateResult]:
    """Placebo DiD estimates in space or in time.

    ``in_space`` drops the truly treated state and assigns treatment to
    each control state in turn, keyed by state code. ``in_time``
    restricts to the pre-treatment window and shifts the treatment year
    to every feasible placebo year (each leaving at least one pre and
    one post year inside the window), keyed by year. Only the binary
    treatment is meaningful here because placebo units have no exposure
    variation.
    """
    base = spec if spec is not None else EstimationSpec()
    if base.treatment != "binary":
        raise EstimationError("placebo suites require the binary treatment")
    results: dict[str, EstimateResult] = {}
    if mode == "in_space":
        states = panel.column("state")
        keep = states != panel.treated_state
        if not np.any(keep):
            raise EstimationError("no control states available for in-space placebos")
        sub = panel.subset(keep)
        for state in sorted(set(sub.column("state").tolist())):
            placebo = replace(sub, treated_state=str(state))
            results[str(state)] = twfe_did(placebo, base)
    elif mode == "in_time":
        years = panel.column("year")
        keep = years < panel.treatment_year
        pre_years = sorted(set(years[keep].tolist()))
        if len(pre_years) < 2:
            raise EstimationError("in-time placebos need at least two pre-treatment years")
        sub = panel.subset(keep)
        for placebo_year in pre_years[1:]:
            shifted = replace(sub, treatment_year=int(placebo_year))
            results[str(placebo_year)] = twfe_did(shifted, base)
    else:
        raise EstimationError(f"unknown placebo mode {mode!r}, expected in_space or in_time")
    return results
