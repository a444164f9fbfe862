"""Worker-year panel: ingestion, validation, sampling rules, and the
fixed-effect design machinery shared by every estimator.

A panel is a set of worker-year observations from an administrative
employment register, together with the treatment calendar and the
municipal exposure ratios that define continuous treatment intensity.
Columns are stored as parallel numpy arrays keyed by name; panels are
treated as immutable, and every transformation returns a new one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, TYPE_CHECKING

import numpy as np

from .numerics import ConvergenceError

if TYPE_CHECKING:  # pragma: no cover
    from .did import EstimationSpec

#: Canonical column order of the panel file format.
CSV_COLUMNS = (
    "worker_id",
    "year",
    "state",
    "municipality",
    "monthly_wage",
    "weekly_hours",
    "retained",
    "occupation_code",
    "activity_code",
    "exposed_occupation",
    "exposed_activity",
    "female",
    "race",
    "age",
    "tenure",
    "education",
)

#: Columns accepted on input beyond the canonical ones. ``age_sq`` and
#: ``tenure_sq`` are validated against their base columns when present and
#: derived otherwise; ``informal`` defaults to zero when absent.
OPTIONAL_COLUMNS = ("age_sq", "tenure_sq", "informal")

EDUCATION_LEVELS = ("less_hs", "hs", "college")

RATIO_CSV_HEADER = ("municipality", "year", "ratio")

_INT_COLUMNS = ("year", "retained", "exposed_occupation", "exposed_activity", "female", "age")
_FLOAT_COLUMNS = ("monthly_wage", "weekly_hours", "tenure")
_FLAG_COLUMNS = ("retained", "exposed_occupation", "exposed_activity", "female")
_STR_COLUMNS = ("worker_id", "state", "municipality", "occupation_code", "activity_code", "race", "education")


class PanelError(ValueError):
    """A panel violates its schema or invariants."""


class PanelFormatError(PanelError):
    """A panel file could not be parsed; carries the offending line number."""

    def __init__(self, line: int, message: str):
        self.line = int(line)
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class Observation:
    """One worker-year row.

    ``log_wage`` is derived; it is only defined for positive wages,
    which the sampling rules guarantee before estimation.
    """

    worker_id: str
    year: int
    state: str
    municipality: str
    monthly_wage: float
    weekly_hours: float
    retained: int
    occupation_code: str
    activity_code: str
    exposed_occupation: int
    exposed_activity: int
    female: int
    race: str
    age: int
    tenure: float
    education: str
    informal: int = 0

    def __post_init__(self):
        if self.education not in EDUCATION_LEVELS:
            raise PanelError(f"unknown education level {self.education!r}")
        for name in ("retained", "exposed_occupation", "exposed_activity", "female", "informal"):
            if getattr(self, name) not in (0, 1):
                raise PanelError(f"{name} must be 0 or 1")

    @property
    def log_wage(self) -> float:
        return math.log(self.monthly_wage)

    @property
    def age_sq(self) -> float:
        return float(self.age) ** 2

    @property
    def tenure_sq(self) -> float:
        return float(self.tenure) ** 2


@dataclass(frozen=True)
class Panel:
    """Immutable worker-year panel.

    Parameters
    ----------
    data : dict of str to ndarray
        Parallel column arrays; must contain every canonical column.
        ``age_sq``/``tenure_sq`` are derived when missing. ``informal``
        is carried only when the panel actually distinguishes sectors.
    treatment_year : int
        First treated calendar year.
    treated_state : str
        State whose workers are treated from ``treatment_year`` on.
    vz_ratio : dict
        Exposure share by (municipality, year); missing keys read as 0.
    censor_rule : tuple or None
        (lower_q, upper_q, winsorize_flag) once sampling rules ran;
        re-applying the same rule is then a no-op.
    meta : dict
        Load/censoring reports and other provenance counters.
    """

    data: dict[str, np.ndarray]
    treatment_year: int = 2014
    treated_state: str = "RR"
    vz_ratio: Mapping[tuple[str, int], float] = field(default_factory=dict)
    censor_rule: tuple[float, float, bool] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = dict(self.data)
        missing = [c for c in CSV_COLUMNS if c not in data]
        if missing:
            raise PanelError(f"panel is missing columns {missing}")
        unknown = [c for c in data if c not in CSV_COLUMNS and c not in OPTIONAL_COLUMNS]
        if unknown:
            raise PanelError(f"panel has unknown columns {unknown}")
        n = len(data["worker_id"])
        for name, col in data.items():
            arr = np.asarray(col)
            if arr.shape != (n,):
                raise PanelError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            data[name] = arr
        if "age_sq" not in data:
            data["age_sq"] = data["age"].astype(float) ** 2
        if "tenure_sq" not in data:
            data["tenure_sq"] = data["tenure"].astype(float) ** 2
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return len(self.data["worker_id"])

    def column(self, name: str) -> np.ndarray:
        if name not in self.data:
            if name == "informal":
                return np.zeros(len(self), dtype=np.int64)
            raise PanelError(f"panel has no column {name!r}")
        return self.data[name]

    @property
    def has_informal(self) -> bool:
        return "informal" in self.data

    @property
    def years(self) -> np.ndarray:
        return np.unique(self.column("year"))

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.column("state").tolist())))

    def log_wage(self) -> np.ndarray:
        wage = self.column("monthly_wage").astype(float)
        if np.any(wage <= 0.0) or not np.all(np.isfinite(wage)):
            raise PanelError(
                "panel contains nonpositive wages; apply_sample_rules before taking logs"
            )
        return np.log(wage)

    def binary_treatment(self) -> np.ndarray:
        """Treated-state post-period indicator."""
        return (
            (self.column("state") == self.treated_state)
            & (self.column("year") >= self.treatment_year)
        ).astype(float)

    def continuous_treatment(self) -> np.ndarray:
        """Exposure ratio per row, scaled by 100 (percentage points)."""
        munis = self.column("municipality")
        years = self.column("year")
        ratio = self.vz_ratio
        return np.array(
            [100.0 * ratio.get((m, int(y)), 0.0) for m, y in zip(munis, years)], dtype=float
        )

    def subset(self, mask: np.ndarray) -> "Panel":
        """Row-filtered copy; censoring provenance is carried along."""
        mask = np.asarray(mask, dtype=bool)
        data = {name: col[mask] for name, col in self.data.items()}
        return replace(self, data=data, meta=dict(self.meta))

    def observations(self) -> Iterator[Observation]:
        cols = [self.column(c) for c in CSV_COLUMNS]
        informal = self.column("informal")
        for i in range(len(self)):
            values = dict(zip(CSV_COLUMNS, (c[i] for c in cols)))
            values["year"] = int(values["year"])
            values["monthly_wage"] = float(values["monthly_wage"])
            values["weekly_hours"] = float(values["weekly_hours"])
            values["tenure"] = float(values["tenure"])
            values["age"] = int(values["age"])
            for flag in _FLAG_COLUMNS:
                values[flag] = int(values[flag])
            for s in _STR_COLUMNS:
                values[s] = str(values[s])
            yield Observation(informal=int(informal[i]), **values)


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise PanelFormatError(line, f"could not parse integer {column}={text!r}") from None


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise PanelFormatError(line, f"could not parse number {column}={text!r}") from None


def load_ratio_csv(path) -> dict[tuple[str, int], float]:
    """Read the exposure table ``municipality,year,ratio``."""
    ratios: dict[tuple[str, int], float] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != RATIO_CSV_HEADER:
            raise PanelError(
                f"ratio file header must be {','.join(RATIO_CSV_HEADER)}, got {header}"
            )
        for line, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise PanelFormatError(line, f"expected 3 fields, got {len(row)}")
            muni = row[0]
            year = _parse_int(row[1], line, "year")
            value = _parse_float(row[2], line, "ratio")
            if not (0.0 <= value <= 1.0) or not np.isfinite(value):
                raise PanelFormatError(line, f"ratio {value} outside [0, 1]")
            key = (muni, year)
            if key in ratios:
                raise PanelFormatError(line, f"duplicate ratio row for {key}")
            ratios[key] = value
    return ratios


def write_ratio_csv(vz_ratio: Mapping[tuple[str, int], float], path) -> None:
    """Write the exposure table, rows sorted by municipality then year."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RATIO_CSV_HEADER)
        for (muni, year), value in sorted(vz_ratio.items()):
            writer.writerow([muni, str(int(year)), repr(float(value))])


def load_csv(
    path,
    ratio_path=None,
    treatment_year: int = 2014,
    treated_state: str | None = None,
) -> Panel:
    """Load and validate a panel file.

    Structural problems raise: a wrong header, an unparseable field
    (reported with its line number), a duplicate worker-year key, or an
    unknown category label. Rows that are well formed but violate an
    arithmetic domain rule (``age_sq != age**2``, negative tenure,
    non-finite wage, ...) are rejected individually and reported in
    ``panel.meta['rejected_rows']`` as (line, reason) pairs.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise PanelError(f"{path}: empty file")
        header = tuple(header)
        if header[: len(CSV_COLUMNS)] != CSV_COLUMNS:
            raise PanelError(
                f"{path}: header must start with the canonical columns "
                f"{','.join(CSV_COLUMNS)}"
            )
        extras = header[len(CSV_COLUMNS) :]
        bad = [c for c in extras if c not in OPTIONAL_COLUMNS]
        if bad:
            raise PanelError(f"{path}: unknown columns {bad}")
        index = {name: i for i, name in enumerate(header)}

        columns: dict[str, list] = {name: [] for name in header}
        rejected: list[tuple[int, str]] = []
        seen: set[tuple[str, int]] = set()

        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PanelFormatError(line, f"expected {len(header)} fields, got {len(row)}")
            values: dict[str, object] = {}
            for name in header:
                text = row[index[name]]
                if name in _INT_COLUMNS or name == "informal":
                    values[name] = _parse_int(text, line, name)
                elif name in _FLOAT_COLUMNS or name in ("age_sq", "tenure_sq"):
                    values[name] = _parse_float(text, line, name)
                else:
                    values[name] = text

            for flag in _FLAG_COLUMNS + (("informal",) if "informal" in index else ()):
                if values[flag] not in (0, 1):
                    raise PanelFormatError(line, f"{flag} must be 0 or 1, got {values[flag]}")
            if values["education"] not in EDUCATION_LEVELS:
                raise PanelFormatError(
                    line,
                    f"unknown education level {values['education']!r}; "
                    f"expected one of {EDUCATION_LEVELS}",
                )

            key = (values["worker_id"], values["year"])
            if key in seen:
                raise PanelError(f"{path}: duplicate worker-year {key} at line {line}")
            seen.add(key)

            reason = _domain_reason(values, "age_sq" in index, "tenure_sq" in index)
            if reason is not None:
                rejected.append((line, reason))
                continue
            for name in header:
                columns[name].append(values[name])

    data: dict[str, np.ndarray] = {}
    for name, items in columns.items():
        if name in _INT_COLUMNS or name == "informal":
            data[name] = np.asarray(items, dtype=np.int64)
        elif name in _FLOAT_COLUMNS or name in ("age_sq", "tenure_sq"):
            data[name] = np.asarray(items, dtype=float)
        else:
            data[name] = np.asarray(items, dtype=object)
    if "informal" in data and not np.any(data["informal"]):
        del data["informal"]

    vz_ratio = load_ratio_csv(ratio_path) if ratio_path is not None else {}
    panel = Panel(
        data=data,
        treatment_year=treatment_year,
        treated_state=_resolve_treated_state(data, vz_ratio, treated_state),
        vz_ratio=vz_ratio,
        meta={"rejected_rows": tuple(rejected), "source": str(path)},
    )
    _validate_panel_invariants(panel)
    return panel


def _domain_reason(values: dict, has_age_sq: bool, has_tenure_sq: bool) -> str | None:
    wage = values["monthly_wage"]
    if not np.isfinite(wage):
        return f"non-finite wage {wage}"
    if wage < 0.0:
        return f"negative wage {wage}"
    if not (0 < values["age"] <= 120):
        return f"age {values['age']} outside (0, 120]"
    if values["tenure"] < 0.0 or not np.isfinite(values["tenure"]):
        return f"invalid tenure {values['tenure']}"
    if values["weekly_hours"] < 0.0 or not np.isfinite(values["weekly_hours"]):
        return f"invalid weekly_hours {values['weekly_hours']}"
    if has_age_sq and abs(values["age_sq"] - float(values["age"]) ** 2) > 1e-6:
        return f"age_sq {values['age_sq']} != age^2 {float(values['age']) ** 2}"
    if has_tenure_sq and abs(values["tenure_sq"] - float(values["tenure"]) ** 2) > 1e-6:
        return f"tenure_sq {values['tenure_sq']} != tenure^2"
    return None


def _resolve_treated_state(data, vz_ratio, treated_state):
    if treated_state is not None:
        return treated_state
    positive = {muni for (muni, _), v in vz_ratio.items() if v > 0.0}
    if positive:
        munis = data["municipality"]
        states = data["state"]
        owners = {str(states[i]) for i in range(len(munis)) if munis[i] in positive}
        if len(owners) == 1:
            return owners.pop()
        if len(owners) > 1:
            raise PanelError(f"positive exposure spans several states {sorted(owners)}")
    raise PanelError("treated_state could not be inferred; pass it explicitly")


def _validate_panel_invariants(panel: Panel) -> None:
    years = panel.years
    if years.size == 0:
        raise PanelError("panel has no rows")
    expected = np.arange(years.min(), years.max() + 1)
    missing = sorted(set(expected.tolist()) - set(years.tolist()))
    if missing:
        raise PanelError(f"panel years have gaps: missing {missing}")

    muni_state: dict[str, str] = {}
    munis = panel.column("municipality")
    states = panel.column("state")
    for m, s in zip(munis.tolist(), states.tolist()):
        prev = muni_state.setdefault(m, s)
        if prev != s:
            raise PanelError(f"municipality {m!r} appears in states {prev!r} and {s!r}")
    for (muni, year), value in panel.vz_ratio.items():
        if not (0.0 <= value <= 1.0):
            raise PanelError(f"exposure ratio {value} for {(muni, year)} outside [0, 1]")
        state = muni_state.get(muni)
        if (
            state is not None
            and state != panel.treated_state
            and year < panel.treatment_year
            and value != 0.0
        ):
            raise PanelError(
                f"control municipality {muni!r} has nonzero pre-period exposure {value}"
            )


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(panel: Panel, path) -> None:
    """Write the canonical panel file.

    Floats are rendered with ``repr`` (shortest round-tripping form), so
    loading a written file and writing it again is byte-identical. The
    ``informal`` column is appended only when the panel carries one.
    """
    columns = list(CSV_COLUMNS) + (["informal"] if panel.has_informal else [])
    arrays = [panel.column(c) for c in columns]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for i in range(len(panel)):
            writer.writerow([_format_cell(arr[i]) for arr in arrays])


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile: the value at rank ``ceil(q * n)`` (1-based).

    This is the convention shared by the wage-censoring rule here and
    the weight-trimming rule in the estimation module; both sides must
    agree with a plain sort-based oracle exactly, so no interpolation.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("quantile requires a nonempty 1-d array")
    if not (0.0 < q <= 1.0):
        raise ValueError(f"quantile level must lie in (0, 1], got {q}")
    rank = min(max(int(math.ceil(q * v.size)), 1), v.size)
    return float(np.sort(v)[rank - 1])


def apply_sample_rules(
    panel: Panel,
    lower_quantile: float = 0.0025,
    upper_quantile: float = 0.9975,
    winsorize: bool = False,
) -> Panel:
    """Apply the wage sampling rules.

    Rows with nonpositive wages are dropped first (zero recorded
    payments are not wages). The remaining wage distribution is then
    censored at the nearest-rank quantiles: values strictly outside the
    band are dropped, or clamped to it when ``winsorize`` is set.

    The applied rule is recorded on the panel; calling this again with
    identical parameters is a no-op, which is what makes the operation
    idempotent (recomputing thresholds on already-censored data would
    otherwise shave a fresh tail each time). Counts of affected rows
    land in ``meta``.
    """
    if not (0.0 < lower_quantile < upper_quantile < 1.0):
        raise PanelError(
            f"need 0 < lower < upper < 1, got ({lower_quantile}, {upper_quantile})"
        )
    rule = (lower_quantile, upper_quantile, bool(winsorize))
    if panel.censor_rule == rule:
        return panel
    if panel.censor_rule is not None:
        raise PanelError(
            f"panel already censored with rule {panel.censor_rule}; "
            "reload the raw panel to change the rule"
        )

    wage = panel.column("monthly_wage").astype(float)
    positive = wage > 0.0
    dropped_nonpositive = int(np.sum(~positive))
    kept = panel.subset(positive)
    wage = kept.column("monthly_wage").astype(float)
    if wage.size == 0:
        raise PanelError("no positive wages remain after dropping zero payments")

    lo = nearest_rank_quantile(wage, lower_quantile)
    hi = nearest_rank_quantile(wage, upper_quantile)
    below = wage < lo
    above = wage > hi
    meta = dict(kept.meta)
    meta.update(
        dropped_nonpositive_wage=dropped_nonpositive,
        censor_lower_value=lo,
        censor_upper_value=hi,
    )
    if winsorize:
        clamped = np.clip(wage, lo, hi)
        data = dict(kept.data)
        data["monthly_wage"] = clamped
        meta.update(winsorized_low=int(below.sum()), winsorized_high=int(above.sum()))
        return replace(kept, data=data, censor_rule=rule, meta=meta)
    meta.update(dropped_low=int(below.sum()), dropped_high=int(above.sum()))
    trimmed = kept.subset(~(below | above))
    return replace(trimmed, censor_rule=rule, meta=meta)


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked regression data with fixed-effect and cluster labels.

    ``fe_codes`` holds zero-based group codes per absorption dimension;
    ``clusters`` are zero-based cluster codes with display labels in
    ``cluster_labels``. ``demean_iterations`` is populated once
    :func:`two_way_demean` has run.
    """

    outcome: np.ndarray
    regressors: np.ndarray
    names: tuple[str, ...]
    weights: np.ndarray
    clusters: np.ndarray
    cluster_labels: tuple[str, ...]
    fe_codes: tuple[np.ndarray, ...]
    fe_names: tuple[str, ...]
    demean_iterations: int | None = None

    def __post_init__(self):
        n = self.outcome.shape[0]
        if self.regressors.shape != (n, len(self.names)):
            raise PanelError(
                f"regressors shape {self.regressors.shape} does not match "
                f"{n} rows x {len(self.names)} names"
            )
        if self.weights.shape != (n,) or np.any(self.weights <= 0):
            raise PanelError("weights must be strictly positive, one per row")
        if self.clusters.shape != (n,):
            raise PanelError("clusters must have one code per row")
        for codes in self.fe_codes:
            if codes.shape != (n,):
                raise PanelError("fixed-effect codes must have one code per row")
        if len(self.fe_codes) != len(self.fe_names):
            raise PanelError("fe_codes and fe_names must align")

    @property
    def n_obs(self) -> int:
        return int(self.outcome.shape[0])

    @property
    def n_clusters(self) -> int:
        return int(self.clusters.max()) + 1 if self.clusters.size else 0

    @property
    def fe_sizes(self) -> tuple[int, ...]:
        return tuple(int(c.max()) + 1 if c.size else 0 for c in self.fe_codes)


def _codes(values: np.ndarray) -> tuple[np.ndarray, tuple[str, ...]]:
    labels, inverse = np.unique(values, return_inverse=True)
    return inverse.astype(np.int64), tuple(str(x) for x in labels.tolist())


def _dummies(values: np.ndarray, prefix: str, levels: tuple[str, ...] | None = None):
    """Reference-coded indicator columns (first level dropped)."""
    if levels is None:
        levels = tuple(sorted(set(values.tolist())))
    cols = []
    names = []
    for level in levels[1:]:
        cols.append((values == level).astype(float))
        names.append(f"{prefix}_{level}")
    return cols, names


def build_design(
    panel: Panel,
    spec: "EstimationSpec",
    weights: np.ndarray | None = None,
    outcome_override: np.ndarray | None = None,
) -> DesignMatrix:
    """Assemble the regression design an :class:`EstimationSpec` describes.

    The outcome is the log wage, the retention flag, or a caller-supplied
    override (the mover flag is computed from occupation histories by the
    estimation module and passed through here). Treatment enters either
    as the treated-post indicator or as the exposure ratio in percentage
    points. Event-study designs get one treated-year interaction per
    calendar year except the reference year; pooled designs add the
    covariate block and any requested exposure interaction.
    """
    n = len(panel)
    if outcome_override is not None:
        y = np.asarray(outcome_override, dtype=float)
        if y.shape != (n,):
            raise PanelError("outcome override must have one value per row")
    elif spec.outcome == "log_wage":
        y = panel.log_wage()
    elif spec.outcome == "retained":
        y = panel.column("retained").astype(float)
    else:
        raise PanelError(f"outcome {spec.outcome!r} requires an explicit override")

    if spec.treatment == "binary":
        treat = panel.binary_treatment()
        treat_name = "treatment"
    else:
        treat = panel.continuous_treatment()
        treat_name = "exposure_pp"

    years = panel.column("year")
    treated_rows = panel.column("state") == panel.treated_state

    columns: list[np.ndarray] = []
    names: list[str] = []
    if spec.family == "event_study":
        for year in panel.years.tolist():
            if year == spec.reference_year:
                continue
            columns.append((treated_rows & (years == year)).astype(float))
            names.append(f"effect_{year}")
        if not columns:
            raise PanelError("event study needs at least one non-reference year")
    else:
        columns.append(treat)
        names.append(treat_name)

    if spec.family == "pooled_ols":
        columns.append(panel.column("female").astype(float))
        names.append("female")
        race_cols, race_names = _dummies(panel.column("race"), "race")
        columns.extend(race_cols)
        names.extend(race_names)
        edu_cols, edu_names = _dummies(panel.column("education"), "education", EDUCATION_LEVELS)
        columns.extend(edu_cols)
        names.extend(edu_names)
        columns.append(panel.column("age").astype(float))
        names.append("age")
        columns.append(panel.column("age_sq").astype(float))
        names.append("age_sq")

    if spec.interactions is not None:
        flag = panel.column(spec.interactions).astype(float)
        columns.append(flag)
        names.append(spec.interactions)
        columns.append(treat * flag)
        names.append(f"{treat_name}_x_{spec.interactions}")

    fe_arrays = []
    for dim in spec.fixed_effects:
        if dim == "worker":
            fe_arrays.append(panel.column("worker_id"))
        elif dim == "year":
            fe_arrays.append(years)
        elif dim == "state":
            fe_arrays.append(panel.column("state"))
        else:
            raise PanelError(f"unknown fixed-effect dimension {dim!r}")
    fe_codes = tuple(_codes(arr)[0] for arr in fe_arrays)

    cluster_col = panel.column("municipality" if spec.cluster == "municipality" else "state")
    cluster_codes, cluster_labels = _codes(cluster_col)

    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise PanelError("weights must have one value per row")

    return DesignMatrix(
        outcome=y,
        regressors=np.column_stack(columns),
        names=tuple(names),
        weights=w,
        clusters=cluster_codes,
        cluster_labels=cluster_labels,
        fe_codes=fe_codes,
        fe_names=tuple(spec.fixed_effects),
    )


def _group_means(z: np.ndarray, codes: np.ndarray, weights: np.ndarray, size: int):
    """Weighted group means, one row per group, computed by bincount."""
    denom = np.bincount(codes, weights=weights, minlength=size)
    means = np.empty((size, z.shape[1]))
    for j in range(z.shape[1]):
        means[:, j] = np.bincount(codes, weights=weights * z[:, j], minlength=size) / denom
    return means


def two_way_demean(
    design: DesignMatrix, tol: float = 1e-10, max_iter: int = 10000
) -> DesignMatrix:
    """Absorb the fixed-effect dimensions by alternating projections.

    Outcome and regressors are swept together; each sweep subtracts
    weighted group means along every absorption dimension in turn, and
    iteration stops once the largest absolute weighted group mean across
    all dimensions falls below ``tol``. The weights are the design's
    observation weights, so a weighted estimation problem is demeaned in
    the same metric it is solved in.
    """
    z = np.column_stack([design.outcome, design.regressors]).astype(float)
    weights = design.weights
    sizes = design.fe_sizes
    iterations = 0
    for iterations in range(1, max_iter + 1):
        worst = 0.0
        for codes, size in zip(design.fe_codes, sizes):
            means = _group_means(z, codes, weights, size)
            worst = max(worst, float(np.max(np.abs(means))) if means.size else 0.0)
            z -= means[codes]
        if worst < tol:
            break
    else:
        raise ConvergenceError(
            f"alternating projections did not reach tol={tol:g} in {max_iter} sweeps"
        )
    return replace(
        design,
        outcome=z[:, 0].copy(),
        regressors=z[:, 1:].copy(),
        demean_iterations=iterations,
    )
