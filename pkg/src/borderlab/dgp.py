"""Synthetic worker-year panels with known ground truth.

The generator mimics a registry panel around a border-state labor
shock: one treated state, two control states, 53 municipalities, eleven
calendar years, worker demographics calibrated to published summary
statistics, and a treatment effect injected on the log wage with a
configurable profile and cohort structure. A shock-consistent variant
ties the injected cohort effects to the equilibrium wage multipliers of
:mod:`borderlab.economy`, so estimators can be audited against
structural ground truth.

Determinism contract: every random draw is a pure function of
``(master seed, component, worker id, year)`` through a splitmix64-style
hash, so regenerating with the same seed is bit-identical and adding
workers never perturbs the draws of existing ones. Treated and control
ids live in disjoint ranges for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.special

from .economy import EconomyParams, ImmigrationShock, shock_multipliers
from .panel import EDUCATION_LEVELS, Panel

#: Cohort wage-effect deltas (log points) matching the published sign
#: pattern: college graduates slightly down, the least educated gaining
#: the most. Pass as ``education_effects`` to switch cohort heterogeneity on.
EDUCATION_COHORT_DEFAULTS: Mapping[str, float] = {
    "less_hs": 0.041,
    "hs": 0.015,
    "college": -0.037,
}

#: Roles a cohort can play in the shock-consistent generator, mapped to
#: the corresponding equilibrium wage multiplier.
SKILL_ROLES = ("high", "formal_low", "informal")

#: Default education-to-role mapping for the shock-consistent generator:
#: college wages track the complementary high-skill multiplier, everyone
#: else in the formal sector tracks the formal low-skill multiplier.
DEFAULT_SKILL_MAP: Mapping[str, str] = {
    "less_hs": "formal_low",
    "hs": "formal_low",
    "college": "high",
}

RACE_LEVELS = ("white", "black", "mixed", "undeclared")

_EXPOSED_OCCUPATIONS = ("512", "513", "521", "711", "716", "784")
_UNEXPOSED_OCCUPATIONS = ("214", "241", "252", "313", "351", "414")
OCCUPATION_CODES = _EXPOSED_OCCUPATIONS + _UNEXPOSED_OCCUPATIONS

_EXPOSED_ACTIVITIES = ("10", "47", "55", "56")
_UNEXPOSED_ACTIVITIES = ("35", "64", "84", "86")
ACTIVITY_CODES = _EXPOSED_ACTIVITIES + _UNEXPOSED_ACTIVITIES

_CONTROL_ID_BASE = 10_000_000

# hash component ids; frozen, never reuse a number
_C_FEMALE = 1
_C_RACE = 2
_C_EDUCATION = 3
_C_AGE0 = 4
_C_TENURE0 = 5
_C_WORKER_EFFECT = 6
_C_MUNICIPALITY = 7
_C_NOISE = 8
_C_PRESENCE = 9
_C_RETAINED = 10
_C_OCC_START = 11
_C_OCC_MOVE = 12
_C_OCC_DEST = 13
_C_ACTIVITY = 14
_C_INFORMAL = 15
_C_HOURS = 16
_C_TENURE_RESET = 17
_C_OCC_UPLIFT = 18
_C_OCC_UPLIFT_DEST = 19

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_PRIME_COMPONENT = np.uint64(0x8CB92BA72F3D8DD7)
_PRIME_SLOT = np.uint64(0xD6E8FEB86659FD93)


class DgpError(ValueError):
    """A generator configuration violates its domain restrictions."""


def _splitmix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def _uniform(seed: int, component: int, worker_ids: np.ndarray, slot=0) -> np.ndarray:
    """Deterministic uniforms in (0, 1), one per (worker, slot) pair."""
    with np.errstate(over="ignore"):
        base = _splitmix(np.uint64(seed) ^ (np.uint64(component) * _PRIME_COMPONENT))
        h = _splitmix(base ^ worker_ids.astype(np.uint64))
        h = _splitmix(h ^ (np.uint64(slot) * _PRIME_SLOT))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _normal(seed, component, worker_ids, slot=0, sd=1.0):
    return sd * scipy.special.ndtri(_uniform(seed, component, worker_ids, slot))


def _categorical(u: np.ndarray, probs) -> np.ndarray:
    edges = np.cumsum(np.asarray(probs, dtype=float))
    edges[-1] = 1.0
    return np.searchsorted(edges, u, side="right").astype(np.int64)


def _check_mix(name: str, probs, size: int) -> None:
    p = np.asarray(probs, dtype=float)
    if p.shape != (size,):
        raise DgpError(f"{name} must have {size} entries, got {p.shape}")
    if np.any(p < 0.0):
        raise DgpError(f"{name} has negative entries")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise DgpError(f"{name} must sum to one within 1e-9, got {p.sum()!r}")


@dataclass(frozen=True)
class DgpConfig:
    """Configuration of the synthetic panel generator.

    Mixes are per group: ``(treated, control)``. The default wage
    levels, gender shares, and education mixes reproduce the published
    pre-treatment summary table; the race shares are the published ones
    renormalized to sum to one.
    """

    n_workers_treated: int = 600
    n_workers_control: int = 1500
    years: tuple[int, int] = (2008, 2018)
    treatment_year: int = 2014
    true_effect_log_points: float = 0.022
    effect_profile: str = "ramp"
    exposure_path: Mapping[int, float] | None = None
    wage_level_means: tuple[float, float] = (1916.07, 1841.05)
    noise_sd: float = 0.25
    worker_effect_sd: float = 0.65
    year_effect_drift: float = 0.01
    education_mix: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (0.24, 0.64, 0.12),
        (0.32, 0.58, 0.10),
    )
    gender_mix: tuple[float, float] = (0.36, 0.32)
    race_mix: tuple[tuple[float, ...], tuple[float, ...]] = (
        (0.22, 0.02, 0.63, 0.13),
        (0.17, 0.03, 0.65, 0.15),
    )
    seed: int = 20140801
    treated_state: str = "RR"
    control_states: tuple[str, str] = ("AC", "AP")
    municipalities: tuple[int, int, int] = (15, 16, 22)
    attrition_rate: float = 0.1
    retention_rate: float = 0.85
    retention_effect: float = 0.0
    informal_fraction: float = 0.0
    education_effects: Mapping[str, float] | None = None
    education_level_effects: Mapping[str, float] | None = None
    education_trend_effects: Mapping[str, float] | None = None
    exposure_effect_activity: float = 0.0
    exposure_effect_occupation: float = 0.0
    base_move_rate: float = 0.02
    mover_uplift: float = 0.0
    age_range: tuple[int, int] = (18, 58)
    tenure_max_months: float = 120.0

    def __post_init__(self):
        if self.n_workers_treated < 1 or self.n_workers_control < 1:
            raise DgpError("worker counts must be positive")
        y0, y1 = self.years
        if y1 <= y0:
            raise DgpError(f"years must span an increasing range, got {self.years}")
        if not (y0 < self.treatment_year <= y1):
            raise DgpError(
                f"treatment_year {self.treatment_year} must leave at least one "
                f"pre-treatment year inside {self.years}"
            )
        if self.effect_profile not in ("flat", "ramp"):
            raise DgpError(f"effect_profile must be flat or ramp, got {self.effect_profile!r}")
        if self.noise_sd < 0.0 or self.worker_effect_sd < 0.0:
            raise DgpError("standard deviations must be nonnegative")
        if not (0.0 <= self.attrition_rate < 1.0):
            raise DgpError(f"attrition_rate must lie in [0, 1), got {self.attrition_rate}")
        if not (0.0 < self.retention_rate <= 1.0):
            raise DgpError(f"retention_rate must lie in (0, 1], got {self.retention_rate}")
        if not (0.0 <= self.informal_fraction < 1.0):
            raise DgpError(f"informal_fraction must lie in [0, 1), got {self.informal_fraction}")
        if min(self.wage_level_means) <= 0.0:
            raise DgpError("wage_level_means must be positive")
        if min(self.municipalities) < 1:
            raise DgpError("each state needs at least one municipality")
        if not (0.0 <= self.base_move_rate < 1.0 and 0.0 <= self.mover_uplift < 1.0):
            raise DgpError("move rates must lie in [0, 1)")
        if len(self.gender_mix) != 2 or not all(0.0 <= p <= 1.0 for p in self.gender_mix):
            raise DgpError(
                f"gender_mix must hold two female shares in [0, 1], got {self.gender_mix}"
            )
        for g in (0, 1):
            _check_mix(f"education_mix[{g}]", self.education_mix[g], len(EDUCATION_LEVELS))
            _check_mix(f"race_mix[{g}]", self.race_mix[g], len(RACE_LEVELS))
        for mapping_name in ("education_effects", "education_level_effects", "education_trend_effects"):
            mapping = getattr(self, mapping_name)
            if mapping is not None:
                bad = set(mapping) - set(EDUCATION_LEVELS)
                if bad:
                    raise DgpError(f"{mapping_name} has unknown education levels {sorted(bad)}")
        if self.exposure_path is not None:
            for year, value in self.exposure_path.items():
                if not (self.treatment_year <= int(year) <= y1):
                    raise DgpError(f"exposure_path year {year} outside the post period")
                if not (0.0 <= float(value) <= 1.0):
                    raise DgpError(f"exposure_path value {value} outside [0, 1]")

    @property
    def year_list(self) -> list[int]:
        return list(range(self.years[0], self.years[1] + 1))

    @property
    def post_years(self) -> list[int]:
        return [y for y in self.year_list if y >= self.treatment_year]

    def resolved_exposure_path(self) -> dict[int, float]:
        """Exposure ratio per post year; default is a 0.4pp-per-year ramp."""
        if self.exposure_path is not None:
            return {int(y): float(v) for y, v in self.exposure_path.items()}
        return {y: 0.004 * (k + 1) for k, y in enumerate(self.post_years)}


@dataclass(frozen=True)
class GroundTruth:
    """Injected effects recorded alongside a generated panel.

    ``att_by_year`` is the observation-weighted mean injected effect
    among treated formal rows per calendar year (zero in every
    pre-treatment year by construction). ``cohort_effects`` records the
    per-cohort truths the heterogeneity estimators target.
    ``continuous_per_pp`` is the per-percentage-point effect when the
    injected path is exactly proportional to the exposure path, else None.
    """

    att_by_year: Mapping[int, float]
    cohort_effects: Mapping[str, float]
    exposure_by_municipality: Mapping[str, Mapping[int, float]]
    continuous_per_pp: float | None
    seed: int

    def to_json_dict(self) -> dict:
        payload = {
            "att_by_year": {str(y): v for y, v in sorted(self.att_by_year.items())},
            "cohort_effects": dict(self.cohort_effects),
            "seed": self.seed,
        }
        if self.continuous_per_pp is not None:
            payload["continuous_per_pp"] = self.continuous_per_pp
        payload["exposure_by_municipality"] = {
            m: {str(y): v for y, v in sorted(path.items())}
            for m, path in sorted(self.exposure_by_municipality.items())
        }
        return payload


def _base_effect_by_year(config: DgpConfig) -> dict[int, float]:
    """Aggregate injected effect per year under the configured profile."""
    out = {y: 0.0 for y in config.year_list}
    post = config.post_years
    for k, year in enumerate(post):
        if config.effect_profile == "flat":
            out[year] = config.true_effect_log_points
        else:
            out[year] = config.true_effect_log_points * (k + 1) / len(post)
    return out


def _state_of_worker(config: DgpConfig, treated: np.ndarray, gids: np.ndarray) -> np.ndarray:
    states = np.empty(treated.shape[0], dtype=object)
    states[treated] = config.treated_state
    control = ~treated
    # stable split: even control index to the first control state, odd to the second
    idx = gids[control] - _CONTROL_ID_BASE
    states[control] = np.where(idx % 2 == 0, config.control_states[0], config.control_states[1])
    return states


def _municipality_labels(config: DgpConfig) -> dict[str, list[str]]:
    counts = dict(
        zip(
            (config.treated_state,) + tuple(config.control_states),
            config.municipalities,
        )
    )
    return {
        state: [f"{state}{k + 1:02d}" for k in range(n_munis)]
        for state, n_munis in counts.items()
    }


def generate(config: DgpConfig) -> tuple[Panel, GroundTruth]:
    """Generate a panel under the reduced-form effect model.

    The log wage is worker effect + common year drift + state level +
    injected treatment effect + noise. Cohort deltas (education and
    exposure) add on top of the aggregate profile when configured;
    education level and trend terms provide deliberate confounding for
    weighting estimators to remove.
    """
    return _simulate(config, mode="base")


def generate_shock_consistent(
    config: DgpConfig,
    params: EconomyParams,
    shock: ImmigrationShock,
    skill_map: Mapping[str, str] | None = None,
    informal_effect_scope: str = "exposed_activity",
) -> tuple[Panel, GroundTruth]:
    """Generate a panel whose cohort effects equal equilibrium multipliers.

    Each education level is mapped to a role (``high``, ``formal_low``
    or ``informal``) and its treated-post wage path scales by the
    corresponding multiplier, i.e. the injected log effect is the log
    multiplier, flat from the treatment year onward. Informal rows scale
    by the informal multiplier; by default only informal rows in exposed
    activities carry it (where the competing labor actually works),
    ``informal_effect_scope="all_informal"`` widens it to every informal
    row.
    """
    if informal_effect_scope not in ("exposed_activity", "all_informal"):
        raise DgpError(f"unknown informal_effect_scope {informal_effect_scope!r}")
    mapping = dict(DEFAULT_SKILL_MAP if skill_map is None else skill_map)
    missing = set(EDUCATION_LEVELS) - set(mapping)
    if missing:
        raise DgpError(f"skill_map is missing education levels {sorted(missing)}")
    bad = {role for role in mapping.values() if role not in SKILL_ROLES}
    if bad:
        raise DgpError(f"skill_map has unknown roles {sorted(bad)}")
    m_i, m_l, m_h = shock_multipliers(params, shock)
    role_effect = {
        "high": math.log(m_h),
        "formal_low": math.log(m_l),
        "informal": math.log(m_i),
    }
    return _simulate(
        config,
        mode="shock",
        education_role_effect={e: role_effect[mapping[e]] for e in EDUCATION_LEVELS},
        informal_effect=role_effect["informal"],
        informal_effect_scope=informal_effect_scope,
    )


def _simulate(
    config: DgpConfig,
    mode: str,
    education_role_effect: Mapping[str, float] | None = None,
    informal_effect: float = 0.0,
    informal_effect_scope: str = "exposed_activity",
) -> tuple[Panel, GroundTruth]:
    seed = config.seed
    y0, y1 = config.years
    years = np.array(config.year_list, dtype=np.int64)
    n_years = years.size
    n_t, n_c = config.n_workers_treated, config.n_workers_control
    n_w = n_t + n_c

    gids = np.concatenate(
        [np.arange(n_t, dtype=np.uint64), _CONTROL_ID_BASE + np.arange(n_c, dtype=np.uint64)]
    )
    treated = np.zeros(n_w, dtype=bool)
    treated[:n_t] = True
    group = np.where(treated, 0, 1)

    states = _state_of_worker(config, treated, gids.astype(np.int64))
    muni_labels = _municipality_labels(config)
    municipality = np.empty(n_w, dtype=object)
    u_muni = _uniform(seed, _C_MUNICIPALITY, gids)
    for state, labels in muni_labels.items():
        rows = states == state
        idx = np.minimum((u_muni[rows] * len(labels)).astype(np.int64), len(labels) - 1)
        municipality[rows] = np.asarray(labels, dtype=object)[idx]

    female = np.where(
        _uniform(seed, _C_FEMALE, gids) < np.asarray(config.gender_mix)[group], 1, 0
    ).astype(np.int64)
    race_idx = np.empty(n_w, dtype=np.int64)
    edu_idx = np.empty(n_w, dtype=np.int64)
    u_race = _uniform(seed, _C_RACE, gids)
    u_edu = _uniform(seed, _C_EDUCATION, gids)
    for g in (0, 1):
        rows = group == g
        race_idx[rows] = _categorical(u_race[rows], config.race_mix[g])
        edu_idx[rows] = _categorical(u_edu[rows], config.education_mix[g])
    race = np.asarray(RACE_LEVELS, dtype=object)[race_idx]
    education = np.asarray(EDUCATION_LEVELS, dtype=object)[edu_idx]

    lo_age, hi_age = config.age_range
    age0 = lo_age + (
        _uniform(seed, _C_AGE0, gids) * (hi_age - lo_age + 1)
    ).astype(np.int64).clip(0, hi_age - lo_age)
    worker_effect = _normal(seed, _C_WORKER_EFFECT, gids, sd=config.worker_effect_sd)
    informal = (_uniform(seed, _C_INFORMAL, gids) < config.informal_fraction).astype(np.int64)

    activity_idx = np.minimum(
        (_uniform(seed, _C_ACTIVITY, gids) * len(ACTIVITY_CODES)).astype(np.int64),
        len(ACTIVITY_CODES) - 1,
    )
    activity = np.asarray(ACTIVITY_CODES, dtype=object)[activity_idx]
    exposed_activity = (activity_idx < len(_EXPOSED_ACTIVITIES)).astype(np.int64)

    # occupation chain; codes index OCCUPATION_CODES, exposed codes first
    n_occ = len(OCCUPATION_CODES)
    n_exposed_occ = len(_EXPOSED_OCCUPATIONS)
    occ = np.empty((n_w, n_years), dtype=np.int64)
    occ[:, 0] = np.minimum(
        (_uniform(seed, _C_OCC_START, gids) * n_occ).astype(np.int64), n_occ - 1
    )
    post = years >= config.treatment_year
    for k in range(1, n_years):
        year = int(years[k])
        current = occ[:, k - 1].copy()
        moves = _uniform(seed, _C_OCC_MOVE, gids, slot=year) < config.base_move_rate
        dest = np.minimum(
            (_uniform(seed, _C_OCC_DEST, gids, slot=year) * n_occ).astype(np.int64), n_occ - 1
        )
        current[moves] = dest[moves]
        if config.mover_uplift > 0.0 and post[k]:
            eligible = treated & (current < n_exposed_occ)
            extra = (
                _uniform(seed, _C_OCC_UPLIFT, gids, slot=year) < config.mover_uplift
            ) & eligible
            dest2 = n_exposed_occ + np.minimum(
                (
                    _uniform(seed, _C_OCC_UPLIFT_DEST, gids, slot=year)
                    * (n_occ - n_exposed_occ)
                ).astype(np.int64),
                n_occ - n_exposed_occ - 1,
            )
            current[extra] = dest2[extra]
        occ[:, k] = current
    exposed_occupation = (occ < n_exposed_occ).astype(np.int64)

    # retention and tenure chains
    retain_prob = np.full((n_w, n_years), config.retention_rate)
    if config.retention_effect != 0.0:
        retain_prob[np.ix_(treated, post)] = np.clip(
            config.retention_rate + config.retention_effect, 0.0, 1.0
        )
    retained = np.empty((n_w, n_years), dtype=np.int64)
    for k in range(n_years):
        u = _uniform(seed, _C_RETAINED, gids, slot=int(years[k]))
        retained[:, k] = (u < retain_prob[:, k]).astype(np.int64)
    tenure = np.empty((n_w, n_years))
    tenure[:, 0] = _uniform(seed, _C_TENURE0, gids) * config.tenure_max_months
    for k in range(1, n_years):
        fresh = _uniform(seed, _C_TENURE_RESET, gids, slot=int(years[k])) * 12.0
        tenure[:, k] = np.where(retained[:, k - 1] == 1, tenure[:, k - 1] + 12.0, fresh)

    presence = np.empty((n_w, n_years), dtype=bool)
    for k in range(n_years):
        presence[:, k] = (
            _uniform(seed, _C_PRESENCE, gids, slot=int(years[k])) >= config.attrition_rate
        )

    # injected effect per worker-year
    base_by_year = _base_effect_by_year(config)
    effect = np.zeros((n_w, n_years))
    if mode == "base":
        edu_delta = np.zeros(n_w)
        if config.education_effects is not None:
            lookup = {e: float(config.education_effects.get(e, 0.0)) for e in EDUCATION_LEVELS}
            edu_delta = np.array([lookup[e] for e in education.tolist()])
        for k, year in enumerate(years.tolist()):
            if not post[k]:
                continue
            cell = base_by_year[year] + edu_delta
            cell = cell + config.exposure_effect_activity * exposed_activity
            cell = cell + config.exposure_effect_occupation * exposed_occupation[:, k]
            effect[:, k] = np.where(treated, cell, 0.0)
    else:
        role = np.array([education_role_effect[e] for e in education.tolist()])
        informal_rows = informal == 1
        if informal_effect_scope == "exposed_activity":
            informal_cell = np.where(exposed_activity == 1, informal_effect, 0.0)
        else:
            informal_cell = np.full(n_w, informal_effect)
        per_worker = np.where(informal_rows, informal_cell, role)
        for k in range(n_years):
            if post[k]:
                effect[:, k] = np.where(treated, per_worker, 0.0)

    # log wage assembly
    sigma_sq = config.worker_effect_sd**2 + config.noise_sd**2
    ref_offset = config.year_effect_drift * (config.treatment_year - 1 - y0)
    state_level = np.array(
        [math.log(m) - 0.5 * sigma_sq - ref_offset for m in config.wage_level_means]
    )
    level = np.zeros(n_w)
    trend = np.zeros(n_w)
    if config.education_level_effects is not None:
        lookup = {e: float(config.education_level_effects.get(e, 0.0)) for e in EDUCATION_LEVELS}
        level = np.array([lookup[e] for e in education.tolist()])
    if config.education_trend_effects is not None:
        lookup = {e: float(config.education_trend_effects.get(e, 0.0)) for e in EDUCATION_LEVELS}
        trend = np.array([lookup[e] for e in education.tolist()])

    log_wage = np.empty((n_w, n_years))
    for k, year in enumerate(years.tolist()):
        noise = _normal(seed, _C_NOISE, gids, slot=year, sd=config.noise_sd)
        log_wage[:, k] = (
            state_level[group]
            + worker_effect
            + (config.year_effect_drift + trend) * (year - y0)
            + level
            + effect[:, k]
            + noise
        )

    hours = np.empty((n_w, n_years))
    for k, year in enumerate(years.tolist()):
        hours[:, k] = 30.0 + np.floor(
            _uniform(seed, _C_HOURS, gids, slot=year) * 15.0
        )

    # flatten present rows, worker-major then year
    rows_w, rows_k = np.nonzero(presence)
    order = np.lexsort((rows_k, rows_w))
    rows_w, rows_k = rows_w[order], rows_k[order]

    worker_id = np.array([f"W{int(g):08d}" for g in gids.tolist()], dtype=object)
    data = {
        "worker_id": worker_id[rows_w],
        "year": years[rows_k],
        "state": states[rows_w],
        "municipality": municipality[rows_w],
        "monthly_wage": np.exp(log_wage[rows_w, rows_k]),
        "weekly_hours": hours[rows_w, rows_k],
        "retained": retained[rows_w, rows_k],
        "occupation_code": np.asarray(OCCUPATION_CODES, dtype=object)[occ[rows_w, rows_k]],
        "activity_code": activity[rows_w],
        "exposed_occupation": exposed_occupation[rows_w, rows_k],
        "exposed_activity": exposed_activity[rows_w],
        "female": female[rows_w],
        "race": race[rows_w],
        "age": age0[rows_w] + (years[rows_k] - y0),
        "tenure": tenure[rows_w, rows_k],
        "education": education[rows_w],
    }
    if config.informal_fraction > 0.0:
        data["informal"] = informal[rows_w]

    path = config.resolved_exposure_path()
    vz_ratio: dict[tuple[str, int], float] = {}
    for state, labels in muni_labels.items():
        for label in labels:
            for year in config.year_list:
                if state == config.treated_state and year in path:
                    vz_ratio[(label, year)] = path[year]
                else:
                    vz_ratio[(label, year)] = 0.0

    panel = Panel(
        data=data,
        treatment_year=config.treatment_year,
        treated_state=config.treated_state,
        vz_ratio=vz_ratio,
        meta={"generator": mode, "seed": seed},
    )

    truth = _ground_truth(
        config,
        mode,
        panel_arrays=(rows_w, rows_k, treated, informal, effect, years),
        education=education,
        exposed_activity=exposed_activity,
        exposed_occupation=exposed_occupation,
        education_role_effect=education_role_effect,
        informal_effect=informal_effect,
        base_by_year=base_by_year,
        muni_labels=muni_labels,
        path=path,
    )
    return panel, truth


def _ground_truth(
    config: DgpConfig,
    mode: str,
    panel_arrays,
    education,
    exposed_activity,
    exposed_occupation,
    education_role_effect,
    informal_effect,
    base_by_year,
    muni_labels,
    path,
) -> GroundTruth:
    rows_w, rows_k, treated, informal, effect, years = panel_arrays
    formal_row = informal[rows_w] == 0
    treated_row = treated[rows_w]
    effect_row = effect[rows_w, rows_k]
    year_row = years[rows_k]

    att: dict[int, float] = {}
    for k, year in enumerate(years.tolist()):
        if year < config.treatment_year:
            att[year] = 0.0
            continue
        mask = treated_row & formal_row & (year_row == year)
        att[year] = float(effect_row[mask].mean()) if np.any(mask) else base_by_year[year]

    cohorts: dict[str, float] = {}
    post_mask = treated_row & (year_row >= config.treatment_year)
    if mode == "shock":
        for e in EDUCATION_LEVELS:
            cohorts[e] = float(education_role_effect[e])
        cohorts["informal"] = float(informal_effect)
        cohorts["exposed_activity"] = 0.0
        cohorts["unexposed_activity"] = 0.0
    else:
        edu_row = education[rows_w]
        for e in EDUCATION_LEVELS:
            mask = post_mask & formal_row & (edu_row == e)
            cohorts[e] = float(effect_row[mask].mean()) if np.any(mask) else 0.0
        act_row = exposed_activity[rows_w]
        for label, value in (("exposed_activity", 1), ("unexposed_activity", 0)):
            mask = post_mask & formal_row & (act_row == value)
            cohorts[label] = float(effect_row[mask].mean()) if np.any(mask) else 0.0
        occ_row = exposed_occupation[rows_w, rows_k]
        for label, value in (("exposed_occupation", 1), ("unexposed_occupation", 0)):
            mask = post_mask & formal_row & (occ_row == value)
            cohorts[label] = float(effect_row[mask].mean()) if np.any(mask) else 0.0
        if config.informal_fraction > 0.0:
            mask = post_mask & ~formal_row
            cohorts["informal"] = float(effect_row[mask].mean()) if np.any(mask) else 0.0

    continuous = _continuous_per_pp(config, base_by_year, path) if mode == "base" else None

    exposure_by_muni = {
        label: {y: (path.get(y, 0.0) if state == config.treated_state else 0.0) for y in config.year_list}
        for state, labels in muni_labels.items()
        for label in labels
    }
    return GroundTruth(
        att_by_year=att,
        cohort_effects=cohorts,
        exposure_by_municipality=exposure_by_muni,
        continuous_per_pp=continuous,
        seed=config.seed,
    )


def _continuous_per_pp(config, base_by_year, path) -> float | None:
    """Per-percentage-point effect when the profile is proportional to exposure."""
    if config.education_effects or config.exposure_effect_activity or config.exposure_effect_occupation:
        return None
    ratios = []
    for year in config.post_years:
        pp = 100.0 * path.get(year, 0.0)
        eff = base_by_year[year]
        if pp == 0.0:
            if eff != 0.0:
                return None
            continue
        ratios.append(eff / pp)
    if not ratios:
        return None
    first = ratios[0]
    scale = max(1.0, abs(first))
    if any(abs(r - first) > 1e-12 * scale for r in ratios):
        return None
    return first


def summary_stats(panel: Panel, year: int | None = None) -> dict[str, dict[str, float]]:
    """Published-style summary block: wages, age, gender, education mix.

    Statistics are taken in a single snapshot year, by default the last
    pre-treatment year, for the treated and pooled control states.
    """
    snap = panel.treatment_year - 1 if year is None else int(year)
    mask = panel.column("year") == snap
    if not np.any(mask):
        raise DgpError(f"panel has no rows in snapshot year {snap}")
    states = panel.column("state")
    out: dict[str, dict[str, float]] = {}
    for label, group_mask in (
        ("treated", mask & (states == panel.treated_state)),
        ("control", mask & (states != panel.treated_state)),
    ):
        rows = np.flatnonzero(group_mask)
        if rows.size == 0:
            raise DgpError(f"no rows for group {label!r} in snapshot year {snap}")
        edu = panel.column("education")[rows]
        out[label] = {
            "mean_wage": float(panel.column("monthly_wage")[rows].mean()),
            "mean_age": float(panel.column("age")[rows].mean()),
            "female_share": float(panel.column("female")[rows].mean()),
            "share_less_hs": float(np.mean(edu == "less_hs")),
            "share_hs": float(np.mean(edu == "hs")),
            "share_college": float(np.mean(edu == "college")),
            "n_workers": float(rows.size),
        }
    return out
