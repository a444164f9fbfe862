"""Synthetic panel generator: determinism, calibration, and ground truth.

The generator must be bit-reproducible from its seed, leave existing
workers' draws untouched when the other group grows, calibrate the
pre-treatment wage level to the configured means, and record ground
truths that match what was actually injected.
"""

import math

import numpy as np
import pytest

from borderlab.dgp import (
    DgpConfig,
    DgpError,
    EDUCATION_COHORT_DEFAULTS,
    generate,
    generate_shock_consistent,
    summary_stats,
)
from borderlab.economy import EconomyParams, ImmigrationShock, shock_multipliers


def _panel_dict(panel):
    return {name: panel.column(name) for name in panel.data}


def test_same_seed_is_bit_reproducible():
    config = DgpConfig(n_workers_treated=50, n_workers_control=70, seed=11)
    panel_a, truth_a = generate(config)
    panel_b, truth_b = generate(config)
    for name, col in _panel_dict(panel_a).items():
        assert np.array_equal(col, panel_b.column(name)), name
    assert truth_a.att_by_year == truth_b.att_by_year
    assert truth_a.seed == truth_b.seed == 11


def test_growing_one_group_leaves_the_other_groups_rows_unchanged():
    small = DgpConfig(n_workers_treated=40, n_workers_control=50, seed=12)
    big = DgpConfig(n_workers_treated=40, n_workers_control=90, seed=12)
    panel_small, _ = generate(small)
    panel_big, _ = generate(big)

    def rows_by_worker(panel):
        out = {}
        ids = panel.column("worker_id")
        wages = panel.column("monthly_wage")
        years = panel.column("year")
        for i in range(len(panel)):
            out.setdefault(str(ids[i]), []).append((int(years[i]), float(wages[i])))
        return out

    small_rows = rows_by_worker(panel_small)
    big_rows = rows_by_worker(panel_big)
    for worker, rows in small_rows.items():
        assert big_rows[worker] == rows


def test_ground_truth_profiles():
    ramp = DgpConfig(n_workers_treated=30, n_workers_control=30, seed=13)
    _, truth = generate(ramp)
    for year in range(2008, 2014):
        assert truth.att_by_year[year] == 0.0
    post = [truth.att_by_year[y] for y in range(2014, 2019)]
    assert post == sorted(post)
    assert abs(post[-1] - 0.022) < 1e-12
    assert abs(post[0] - 0.022 / 5.0) < 1e-12

    flat = DgpConfig(
        n_workers_treated=30, n_workers_control=30, seed=13, effect_profile="flat"
    )
    _, truth_flat = generate(flat)
    assert all(abs(truth_flat.att_by_year[y] - 0.022) < 1e-12 for y in range(2014, 2019))


def test_continuous_truth_present_only_when_path_is_proportional():
    ramp = DgpConfig(n_workers_treated=30, n_workers_control=30, seed=14)
    _, truth = generate(ramp)
    assert truth.continuous_per_pp is not None
    # ramp effect over ramp exposure: per-pp slope is constant
    exposure_last = 0.004 * 5 * 100.0
    assert abs(truth.continuous_per_pp - 0.022 / exposure_last) < 1e-15

    flat = DgpConfig(
        n_workers_treated=30, n_workers_control=30, seed=14, effect_profile="flat"
    )
    _, truth_flat = generate(flat)
    assert truth_flat.continuous_per_pp is None


def test_wage_level_calibration_hits_configured_means():
    config = DgpConfig(n_workers_treated=900, n_workers_control=900, seed=15)
    panel, _ = generate(config)
    years = panel.column("year")
    states = panel.column("state")
    wages = panel.column("monthly_wage").astype(float)
    pre = years == 2013
    treated_mean = float(np.exp(np.log(wages[pre & (states == "RR")]).mean()))
    control_mean = float(np.exp(np.log(wages[pre & (states != "RR")]).mean()))
    # geometric means concentrate at exp(E log wage) = target * exp(-sigma^2/2) * correction;
    # the generator centers the log level so the arithmetic mean matches the target
    assert abs(treated_mean / 1916.07 - math.exp(-0.5 * (0.25**2 + 0.65**2))) < 0.08
    arithmetic_treated = float(wages[pre & (states == "RR")].mean())
    assert abs(arithmetic_treated - 1916.07) < 0.12 * 1916.07
    assert abs(float(wages[pre & (states != "RR")].mean()) - 1841.05) < 0.12 * 1841.05
    assert control_mean > 0.0


def test_exposure_path_written_for_treated_municipalities_only():
    config = DgpConfig(n_workers_treated=30, n_workers_control=30, seed=16)
    panel, truth = generate(config)
    for (muni, year), value in panel.vz_ratio.items():
        if muni.startswith("RR") and year >= 2014:
            assert value == 0.004 * (year - 2013)
        else:
            assert value == 0.0
    for muni, path in truth.exposure_by_municipality.items():
        assert (max(path.values()) > 0.0) == muni.startswith("RR")


def test_shock_consistent_truth_equals_log_multipliers():
    params = EconomyParams(alpha=0.3, beta=0.5, informal_share=0.45)
    shock = ImmigrationShock(eta=0.02, mu=0.10)
    m_i, m_l, m_h = shock_multipliers(params, shock)
    config = DgpConfig(
        n_workers_treated=60, n_workers_control=60, seed=17, informal_fraction=0.25
    )
    skill_map = {"college": "informal", "hs": "formal_low", "less_hs": "high"}
    panel, truth = generate_shock_consistent(config, params, shock, skill_map=skill_map)
    assert truth.cohort_effects["college"] == math.log(m_i)
    assert truth.cohort_effects["hs"] == math.log(m_l)
    assert truth.cohort_effects["less_hs"] == math.log(m_h)
    assert truth.cohort_effects["informal"] == math.log(m_i)
    assert panel.has_informal


def test_shock_consistent_default_map_follows_skill_ladder():
    params = EconomyParams(alpha=0.3, beta=0.5)
    shock = ImmigrationShock(eta=0.02, mu=0.10)
    _, truth = generate_shock_consistent(
        DgpConfig(n_workers_treated=40, n_workers_control=40, seed=18), params, shock
    )
    m_i, m_l, m_h = shock_multipliers(params, shock)
    assert truth.cohort_effects["college"] == math.log(m_h)
    assert truth.cohort_effects["hs"] == math.log(m_l)
    assert truth.cohort_effects["less_hs"] == math.log(m_l)


def test_shock_consistent_rejects_bad_maps_and_scopes():
    params = EconomyParams(alpha=0.3, beta=0.5)
    shock = ImmigrationShock(eta=0.02, mu=0.10)
    config = DgpConfig(n_workers_treated=20, n_workers_control=20, seed=19)
    with pytest.raises(DgpError, match="missing"):
        generate_shock_consistent(config, params, shock, skill_map={"college": "high"})
    with pytest.raises(DgpError, match="unknown roles"):
        generate_shock_consistent(
            config,
            params,
            shock,
            skill_map={"college": "ceo", "hs": "formal_low", "less_hs": "high"},
        )
    with pytest.raises(DgpError, match="informal_effect_scope"):
        generate_shock_consistent(
            config, params, shock, informal_effect_scope="everything"
        )


def test_education_cohort_defaults_are_opt_in():
    config = DgpConfig(
        n_workers_treated=40, n_workers_control=40, seed=20, effect_profile="flat"
    )
    _, plain = generate(config)
    # homogeneous flat profile: every education cohort gets the aggregate effect
    for level in ("less_hs", "hs", "college"):
        assert abs(plain.cohort_effects[level] - 0.022) < 1e-12

    hetero = DgpConfig(
        n_workers_treated=40,
        n_workers_control=40,
        seed=20,
        education_effects=dict(EDUCATION_COHORT_DEFAULTS),
    )
    _, truth = generate(hetero)
    assert truth.cohort_effects["college"] < 0.0
    assert truth.cohort_effects["less_hs"] > truth.cohort_effects["hs"] > 0.0


def test_summary_stats_snapshot():
    config = DgpConfig(n_workers_treated=80, n_workers_control=90, seed=21)
    panel, _ = generate(config)
    stats = summary_stats(panel)
    assert set(stats) == {"treated", "control"}
    for block in stats.values():
        assert 0.0 <= block["female_share"] <= 1.0
        assert block["mean_wage"] > 0.0
        assert block["n_workers"] > 0
        shares = [block[f"share_{level}"] for level in ("less_hs", "hs", "college")]
        assert abs(sum(shares) - 1.0) < 1e-9
    with pytest.raises(DgpError, match="snapshot year"):
        summary_stats(panel, year=1999)


def test_config_validation_errors():
    with pytest.raises(DgpError):
        DgpConfig(n_workers_treated=0)
    with pytest.raises(DgpError):
        DgpConfig(years=(2010, 2009))
    with pytest.raises(DgpError):
        DgpConfig(treatment_year=2008)
    with pytest.raises(DgpError):
        DgpConfig(effect_profile="spike")
    with pytest.raises(DgpError):
        DgpConfig(education_mix=((0.5, 0.5, 0.5), (0.3, 0.6, 0.1)))
    with pytest.raises(DgpError):
        DgpConfig(gender_mix=(0.4, 1.2))
    with pytest.raises(DgpError):
        DgpConfig(education_effects={"masters": 0.01})
    with pytest.raises(DgpError):
        DgpConfig(exposure_path={2010: 0.01})
    with pytest.raises(DgpError):
        DgpConfig(attrition_rate=1.0)
