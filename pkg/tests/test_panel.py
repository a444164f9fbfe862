"""Panel container, file formats, sampling rules, and design assembly.

The CSV writer must round-trip byte for byte, structural file problems
must raise with line numbers while domain violations reject rows
individually, the nearest-rank quantile must agree with a plain sort
oracle, and the demeaning must null weighted group means.
"""

import math

import numpy as np
import pytest

from borderlab.dgp import DgpConfig, generate
from borderlab.did import EstimationSpec
from borderlab.panel import (
    CSV_COLUMNS,
    EDUCATION_LEVELS,
    Panel,
    PanelError,
    PanelFormatError,
    apply_sample_rules,
    build_design,
    load_csv,
    load_ratio_csv,
    nearest_rank_quantile,
    two_way_demean,
    write_csv,
    write_ratio_csv,
)

HEADER = ",".join(CSV_COLUMNS)

ROW = (
    "W1,2013,RR,RR01,1500.5,40,1,2510,56,1,1,0,white,30,24,hs"
)


def _small_panel(**overrides):
    config = DgpConfig(
        n_workers_treated=25,
        n_workers_control=35,
        seed=overrides.pop("seed", 321),
        **overrides,
    )
    return generate(config)[0]


def _write_lines(tmp_path, lines, name="panel.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# file round trip and validation


def test_write_load_write_is_byte_identical(tmp_path):
    panel = _small_panel()
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    write_csv(panel, first)
    reloaded = load_csv(first, treated_state="RR")
    write_csv(reloaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert len(reloaded) == len(panel)
    assert reloaded.meta["rejected_rows"] == ()


def test_ratio_csv_round_trip(tmp_path):
    ratios = {("RR01", 2014): 0.004, ("RR01", 2015): 0.008, ("AC01", 2014): 0.0}
    path = tmp_path / "ratios.csv"
    write_ratio_csv(ratios, path)
    assert load_ratio_csv(path) == ratios


def test_load_rejects_wrong_header(tmp_path):
    path = _write_lines(tmp_path, ["worker,year", ROW])
    with pytest.raises(PanelError, match="canonical columns"):
        load_csv(path)


def test_load_reports_line_number_on_parse_error(tmp_path):
    bad = ROW.replace("2013", "twenty13")
    path = _write_lines(tmp_path, [HEADER, bad])
    with pytest.raises(PanelFormatError, match="line 2"):
        load_csv(path)


def test_load_rejects_duplicate_worker_year(tmp_path):
    path = _write_lines(tmp_path, [HEADER, ROW, ROW])
    with pytest.raises(PanelError, match="duplicate"):
        load_csv(path)


def test_load_rejects_unknown_education_label(tmp_path):
    bad = ROW.replace(",hs", ",phd")
    path = _write_lines(tmp_path, [HEADER, bad])
    with pytest.raises(PanelFormatError, match="education"):
        load_csv(path)


def test_load_rejects_domain_violations_row_by_row(tmp_path):
    header = HEADER + ",age_sq,tenure_sq"
    good = ROW + ",900,576"
    bad_age = ROW.replace("W1", "W2") + ",901,576"
    negative_tenure = ROW.replace("W1", "W3").replace(",24,", ",-2,") + ",900,4"
    path = _write_lines(tmp_path, [header, good, bad_age, negative_tenure])
    panel = load_csv(path, treated_state="RR")
    assert len(panel) == 1
    reasons = {line: reason for line, reason in panel.meta["rejected_rows"]}
    assert set(reasons) == {3, 4}


def test_panel_invariants_catch_bad_geography_and_ratio():
    data = {c: np.asarray(v) for c, v in _columns_for(("W1", "W2"), ("RR", "AC")).items()}
    with pytest.raises(PanelError, match="appears in states"):
        _validate(Panel(data=dict(data, municipality=np.asarray(["M1", "M1"], dtype=object))))
    with pytest.raises(PanelError, match="outside"):
        _validate(
            Panel(
                data=data,
                vz_ratio={("RR01", 2014): 1.5},
            )
        )


def _columns_for(workers, states):
    n = len(workers)
    return {
        "worker_id": np.asarray(workers, dtype=object),
        "year": np.full(n, 2014, dtype=np.int64),
        "state": np.asarray(states, dtype=object),
        "municipality": np.asarray([s + "01" for s in states], dtype=object),
        "monthly_wage": np.full(n, 1200.0),
        "weekly_hours": np.full(n, 40.0),
        "retained": np.ones(n, dtype=np.int64),
        "occupation_code": np.asarray(["2510"] * n, dtype=object),
        "activity_code": np.asarray(["56"] * n, dtype=object),
        "exposed_occupation": np.zeros(n, dtype=np.int64),
        "exposed_activity": np.zeros(n, dtype=np.int64),
        "female": np.zeros(n, dtype=np.int64),
        "race": np.asarray(["white"] * n, dtype=object),
        "age": np.full(n, 30, dtype=np.int64),
        "tenure": np.full(n, 24.0),
        "education": np.asarray(["hs"] * n, dtype=object),
    }


def _validate(panel):
    from borderlab.panel import _validate_panel_invariants

    _validate_panel_invariants(panel)


# ---------------------------------------------------------------------------
# quantiles and sampling rules


def test_nearest_rank_quantile_matches_sort_oracle():
    rng = np.random.default_rng(70)
    for _ in range(50):
        n = int(rng.integers(1, 400))
        values = rng.normal(size=n)
        q = float(rng.uniform(0.01, 1.0))
        expected = float(np.sort(values)[max(math.ceil(q * n), 1) - 1])
        assert nearest_rank_quantile(values, q) == expected
    with pytest.raises(ValueError):
        nearest_rank_quantile(np.array([]), 0.5)
    with pytest.raises(ValueError):
        nearest_rank_quantile(np.array([1.0]), 0.0)


def test_apply_sample_rules_drop_counts_match_oracle():
    panel = _small_panel(seed=654)
    censored = apply_sample_rules(panel)
    wage = panel.column("monthly_wage").astype(float)
    positive = wage[wage > 0.0]
    lo = nearest_rank_quantile(positive, 0.0025)
    hi = nearest_rank_quantile(positive, 0.9975)
    expected_kept = int(np.sum((positive >= lo) & (positive <= hi)))
    assert len(censored) == expected_kept
    assert censored.meta["dropped_low"] == int(np.sum(positive < lo))
    assert censored.meta["dropped_high"] == int(np.sum(positive > hi))
    assert censored.censor_rule == (0.0025, 0.9975, False)


def test_apply_sample_rules_is_idempotent_and_guards_rule_changes():
    panel = _small_panel(seed=655)
    once = apply_sample_rules(panel)
    twice = apply_sample_rules(once)
    assert twice is once
    with pytest.raises(PanelError, match="already censored"):
        apply_sample_rules(once, lower_quantile=0.01, upper_quantile=0.99)


def test_apply_sample_rules_winsorize_clamps_instead_of_dropping():
    panel = _small_panel(seed=656)
    clamped = apply_sample_rules(panel, winsorize=True)
    assert len(clamped) == len(panel)
    wage = clamped.column("monthly_wage").astype(float)
    assert wage.min() >= clamped.meta["censor_lower_value"] - 1e-12
    assert wage.max() <= clamped.meta["censor_upper_value"] + 1e-12


def test_nonpositive_wages_always_dropped(tmp_path):
    panel = _small_panel(seed=657)
    data = {k: v.copy() for k, v in panel.data.items()}
    data["monthly_wage"][:3] = 0.0
    dirty = Panel(
        data=data,
        treatment_year=panel.treatment_year,
        treated_state=panel.treated_state,
        vz_ratio=panel.vz_ratio,
    )
    censored = apply_sample_rules(dirty)
    assert censored.meta["dropped_nonpositive_wage"] == 3
    assert np.all(censored.column("monthly_wage") > 0.0)


# ---------------------------------------------------------------------------
# treatment columns


def test_binary_treatment_is_treated_state_post_indicator():
    panel = _small_panel(seed=658)
    treat = panel.binary_treatment()
    states = panel.column("state")
    years = panel.column("year")
    expected = ((states == "RR") & (years >= 2014)).astype(float)
    assert np.array_equal(treat, expected)


def test_continuous_treatment_reads_exposure_in_percentage_points():
    panel = _small_panel(seed=659)
    exposure = panel.continuous_treatment()
    munis = panel.column("municipality")
    years = panel.column("year")
    expected = np.array(
        [100.0 * panel.vz_ratio.get((m, int(y)), 0.0) for m, y in zip(munis, years)]
    )
    assert np.array_equal(exposure, expected)
    assert exposure[years < 2014].max() == 0.0


# ---------------------------------------------------------------------------
# design assembly and demeaning


def test_build_design_event_study_skips_reference_year():
    panel = _small_panel(seed=660)
    spec = EstimationSpec(family="event_study", reference_year=2013)
    design = build_design(panel, spec)
    assert "effect_2013" not in design.names
    assert "effect_2008" in design.names and "effect_2018" in design.names
    assert design.regressors.shape[1] == len(panel.years) - 1


def test_build_design_pooled_block_and_interaction():
    panel = _small_panel(seed=661, informal_fraction=0.3)
    spec = EstimationSpec(
        family="pooled_ols",
        treatment="continuous",
        fixed_effects=("state", "year"),
        cluster="state",
        interactions="informal",
    )
    design = build_design(panel, spec)
    assert design.names[0] == "exposure_pp"
    assert "female" in design.names
    assert "age_sq" in design.names
    for level in EDUCATION_LEVELS[1:]:
        assert f"education_{level}" in design.names
    assert "informal" in design.names
    assert "exposure_pp_x_informal" in design.names
    flag = panel.column("informal").astype(float)
    np.testing.assert_array_equal(
        design.regressors[:, design.names.index("exposure_pp_x_informal")],
        design.regressors[:, 0] * flag,
    )


def test_two_way_demean_nulls_weighted_group_means():
    rng = np.random.default_rng(71)
    panel = _small_panel(seed=662)
    spec = EstimationSpec()
    weights = rng.uniform(0.2, 3.0, size=len(panel))
    design = build_design(panel, spec, weights=weights)
    demeaned = two_way_demean(design)
    z = np.column_stack([demeaned.outcome, demeaned.regressors])
    for codes, size in zip(design.fe_codes, design.fe_sizes):
        for j in range(z.shape[1]):
            sums = np.bincount(codes, weights=weights * z[:, j], minlength=size)
            denom = np.bincount(codes, weights=weights, minlength=size)
            assert np.max(np.abs(sums / denom)) < 1e-9
    assert demeaned.demean_iterations >= 1


def test_build_design_rejects_unknown_fixed_effect():
    panel = _small_panel(seed=663)
    spec = EstimationSpec(fixed_effects=("worker", "month"))
    with pytest.raises(PanelError, match="fixed-effect"):
        build_design(panel, spec)
