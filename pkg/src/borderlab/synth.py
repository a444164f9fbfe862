"""Synthetic control and synthetic difference-in-differences.

Both methods work on state-by-year aggregates of the worker panel. The
synthetic control fits simplex donor weights to the treated state's
pre-treatment mean log wage path; the synthetic DiD variant fits the
same weights after absorbing level differences (so only slopes must
match) and adds simplex time weights mapping pre-treatment years to the
post-treatment mean, estimating the effect as a weighted double
difference. A placebo routine re-fits the synthetic control with each
donor as pseudo-treated and ranks the true treated effect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .numerics import SimplexQpProblem, simplex_qp_solve
from .panel import Panel, PanelError


class SynthError(ValueError):
    """An aggregate panel cannot support the requested fit."""


@dataclass(frozen=True)
class AggregatePanel:
    """State-by-year mean log wages.

    ``values`` has one row per state (ordered like ``states``) and one
    column per year. Every cell must be present and finite; the treated
    state must be listed and leave at least two donors.
    """

    states: tuple[str, ...]
    years: np.ndarray
    values: np.ndarray
    treated_state: str
    treatment_year: int

    def __post_init__(self):
        object.__setattr__(self, "years", np.asarray(self.years, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(set(self.states)) != len(self.states):
            raise SynthError("duplicate state labels")
        if self.values.shape != (len(self.states), self.years.size):
            raise SynthError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.states)} states x {self.years.size} years"
            )
        if not np.all(np.isfinite(self.values)):
            raise SynthError("aggregate outcomes must be finite in every cell")
        if np.any(np.diff(self.years) != 1):
            raise SynthError("years must be consecutive")
        if self.treated_state not in self.states:
            raise SynthError(f"treated state {self.treated_state!r} not in panel")
        if len(self.states) < 3:
            raise SynthError("need the treated state plus at least two donors")
        if not np.any(self.pre_mask) or not np.any(self.post_mask):
            raise SynthError("need at least one pre- and one post-treatment year")

    @property
    def pre_mask(self) -> np.ndarray:
        return self.years < self.treatment_year

    @property
    def post_mask(self) -> np.ndarray:
        return self.years >= self.treatment_year

    @property
    def treated_index(self) -> int:
        return self.states.index(self.treated_state)

    @property
    def donors(self) -> tuple[str, ...]:
        return tuple(s for s in self.states if s != self.treated_state)

    def series(self, state: str) -> np.ndarray:
        return self.values[self.states.index(state)]

    def donor_matrix(self) -> np.ndarray:
        """Donor outcomes, one column per donor in ``donors`` order."""
        rows = [i for i, s in enumerate(self.states) if s != self.treated_state]
        return self.values[rows].T


def aggregate_states(panel: Panel) -> AggregatePanel:
    """Collapse a worker panel to state-by-year mean log wages.

    The mean is unweighted over worker-year rows. Every state must be
    observed in every year; a missing cell means the aggregate paths are
    not comparable and raises.
    """
    log_wage = panel.log_wage()
    states = panel.states
    years = panel.years
    state_col = panel.column("state")
    year_col = panel.column("year")
    values = np.empty((len(states), years.size))
    for i, state in enumerate(states):
        in_state = state_col == state
        for j, year in enumerate(years.tolist()):
            cell = log_wage[in_state & (year_col == year)]
            if cell.size == 0:
                raise PanelError(f"no observations for state {state!r} in year {year}")
            values[i, j] = float(cell.mean())
    return AggregatePanel(
        states=states,
        years=years,
        values=values,
        treated_state=panel.treated_state,
        treatment_year=panel.treatment_year,
    )


@dataclass(frozen=True)
class ScmSolution:
    """Synthetic-control weights, paths, and effect.

    ``weights`` aligns with ``donors``. ``mspe`` is the mean squared
    pre-treatment gap between the treated and synthetic paths. The
    effect is the pre/post difference of the treated path minus the
    pre/post difference of the synthetic path, period means unweighted
    over years.
    """

    donors: tuple[str, ...]
    weights: np.ndarray
    years: np.ndarray
    treated_path: np.ndarray
    synthetic_path: np.ndarray
    treatment_year: int
    mspe: float
    effect: float

    def weight_map(self) -> dict[str, float]:
        return {d: float(w) for d, w in zip(self.donors, self.weights)}

    def path_rows(self) -> list[list[float]]:
        """Plot-ready rows ``[year, treated, synthetic]``."""
        return [
            [int(y), float(t), float(s)]
            for y, t, s in zip(self.years.tolist(), self.treated_path, self.synthetic_path)
        ]


def _double_difference(
    years: np.ndarray, treatment_year: int, treated: np.ndarray, synthetic: np.ndarray
) -> float:
    pre = years < treatment_year
    post = ~pre
    return float(
        (treated[post].mean() - treated[pre].mean())
        - (synthetic[post].mean() - synthetic[pre].mean())
    )


def scm_fit(agg: AggregatePanel) -> ScmSolution:
    """Fit synthetic-control weights on the pre-treatment path.

    Weights minimize the squared pre-period gap over the simplex; the
    synthetic path extends the weighted donor combination through the
    post period.
    """
    pre = agg.pre_mask
    treated = agg.series(agg.treated_state)
    donors = agg.donor_matrix()
    weights = simplex_qp_solve(SimplexQpProblem(treated[pre], donors[pre]))
    synthetic = donors @ weights
    gaps = treated[pre] - synthetic[pre]
    return ScmSolution(
        donors=agg.donors,
        weights=weights,
        years=agg.years,
        treated_path=treated,
        synthetic_path=synthetic,
        treatment_year=agg.treatment_year,
        mspe=float(np.mean(gaps**2)),
        effect=_double_difference(agg.years, agg.treatment_year, treated, synthetic),
    )


@dataclass(frozen=True)
class SdidSolution:
    """Synthetic DiD unit and time weights with the double-difference effect.

    ``synthetic_path`` is the unit-weighted donor path shifted by the
    time-weighted pre-period level gap, so treated and synthetic paths
    coincide in the weighted pre-period average by construction.
    ``mspe`` is the mean squared pre-period gap after that level shift.
    """

    donors: tuple[str, ...]
    unit_weights: np.ndarray
    time_weights: Mapping[int, float]
    years: np.ndarray
    treated_path: np.ndarray
    synthetic_path: np.ndarray
    treatment_year: int
    mspe: float
    effect: float
    metadata: Mapping[str, object]

    def weight_map(self) -> dict[str, float]:
        return {d: float(w) for d, w in zip(self.donors, self.unit_weights)}

    def path_rows(self) -> list[list[float]]:
        return [
            [int(y), float(t), float(s)]
            for y, t, s in zip(self.years.tolist(), self.treated_path, self.synthetic_path)
        ]


def _simplex_ls(target: np.ndarray, design: np.ndarray, ridge: float) -> np.ndarray:
    """Simplex least squares on centered data with a small ridge.

    Both the target and each design column are centered, which absorbs a
    free intercept; the ridge keeps the problem strongly convex when
    donors are collinear.
    """
    target_c = target - target.mean()
    design_c = design - design.mean(axis=0, keepdims=True)
    k = design.shape[1]
    augmented = np.vstack([design_c, np.sqrt(ridge) * np.eye(k)])
    padded = np.concatenate([target_c, np.zeros(k)])
    return simplex_qp_solve(SimplexQpProblem(padded, augmented))


def sdid_fit(
    agg: AggregatePanel,
    ridge: float = 1e-6,
    unit_weights: np.ndarray | None = None,
    time_weights: np.ndarray | None = None,
) -> SdidSolution:
    """Synthetic difference-in-differences on the aggregate panel.

    Unit weights solve the intercept-augmented simplex least squares on
    pre-period donor paths (the intercept absorbs level differences, so
    only slopes must be matched); time weights solve the symmetric
    problem mapping each donor's pre-period years to its post-period
    mean. The estimate is the double difference with both weightings:

        (treated post mean - time-weighted treated pre)
      - sum_j unit_w_j (donor_j post mean - time-weighted donor_j pre)

    Either weighting can be overridden, e.g. uniform weights reduce the
    estimate to the aggregate 2x2 DiD.
    """
    if ridge < 0.0:
        raise SynthError("ridge must be nonnegative")
    pre = agg.pre_mask
    post = agg.post_mask
    if int(pre.sum()) < 2:
        raise SynthError("synthetic DiD needs at least two pre-treatment years")
    treated = agg.series(agg.treated_state)
    donors = agg.donor_matrix()
    n_donors = donors.shape[1]

    if unit_weights is None:
        omega = _simplex_ls(treated[pre], donors[pre], ridge)
    else:
        omega = _check_simplex("unit_weights", unit_weights, n_donors)
    if time_weights is None:
        # donors as rows: map pre-period years to the post-period mean
        lam = _simplex_ls(donors[post].mean(axis=0), donors[pre].T, ridge)
    else:
        lam = _check_simplex("time_weights", time_weights, int(pre.sum()))

    treated_pre = float(treated[pre] @ lam)
    donor_pre = donors[pre].T @ lam
    effect = float(
        (treated[post].mean() - treated_pre)
        - (donors[post].mean(axis=0) - donor_pre) @ omega
    )

    raw_synth = donors @ omega
    shift = treated_pre - float(raw_synth[pre] @ lam)
    synthetic = raw_synth + shift
    gaps = treated[pre] - synthetic[pre]
    pre_years = agg.years[pre].tolist()
    return SdidSolution(
        donors=agg.donors,
        unit_weights=omega,
        time_weights={int(y): float(l) for y, l in zip(pre_years, lam)},
        years=agg.years,
        treated_path=treated,
        synthetic_path=synthetic,
        treatment_year=agg.treatment_year,
        mspe=float(np.mean(gaps**2)),
        effect=effect,
        metadata={"ridge": float(ridge), "variant": "intercept_augmented_simplex"},
    )


def _check_simplex(name: str, weights, size: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (size,):
        raise SynthError(f"{name} must have shape ({size},), got {w.shape}")
    if np.any(w < 0.0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise SynthError(f"{name} must be nonnegative and sum to one")
    return w


@dataclass(frozen=True)
class ScmPlaceboReport:
    """Placebo effects with the treated state's rank among all units.

    ``effects`` maps every unit (treated included) to its synthetic
    control effect; placebo fits exclude the truly treated state from
    the donor pool so post-treatment contamination never enters a
    placebo counterfactual. ``treated_rank`` is the 1-based rank of the
    treated effect magnitude (rank 1 = largest absolute effect).
    """

    effects: Mapping[str, float]
    treated_state: str
    treated_rank: int
    n_units: int

    @property
    def rank_p_value(self) -> float:
        return self.treated_rank / self.n_units


def scm_placebo(agg: AggregatePanel) -> ScmPlaceboReport:
    """Re-fit the synthetic control with each donor as pseudo-treated."""
    if len(agg.states) < 4:
        raise SynthError(
            "placebo ranking needs at least three donors so each placebo fit "
            "keeps two; got fewer units"
        )
    effects = {agg.treated_state: scm_fit(agg).effect}
    donor_rows = [i for i, s in enumerate(agg.states) if s != agg.treated_state]
    donor_states = tuple(agg.states[i] for i in donor_rows)
    donor_values = agg.values[donor_rows]
    for pseudo in donor_states:
        placebo = AggregatePanel(
            states=donor_states,
            years=agg.years,
            values=donor_values,
            treated_state=pseudo,
            treatment_year=agg.treatment_year,
        )
        effects[pseudo] = scm_fit(placebo).effect
    treated_abs = abs(effects[agg.treated_state])
    rank = 1 + sum(1 for s, e in effects.items() if s != agg.treated_state and abs(e) > treated_abs)
    return ScmPlaceboReport(
        effects=effects,
        treated_state=agg.treated_state,
        treated_rank=rank,
        n_units=len(agg.states),
    )
