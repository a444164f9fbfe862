"""Equilibrium solvers against finite differences and root-finding oracles.

The regional economy's wages must equal marginal products recomputed by
central finite differences of the production function; the shock
multipliers must match the ratio of two independently solved equilibria;
the border-town closed forms must match bisection on the labor residual.
"""

import math

import numpy as np
import pytest

from borderlab.economy import (
    BorderTownParams,
    ComparativeStaticsReport,
    EconomyParams,
    ImmigrationShock,
    ParameterError,
    border_town_labor_residual,
    border_town_params_from_mapping,
    comparative_statics_report,
    economy_params_from_mapping,
    implied_delta,
    read_params_file,
    shock_from_mapping,
    shock_multipliers,
    shocked_equilibrium,
    solve_baseline,
    solve_border_town,
    solve_border_town_bisection,
    write_report_csv,
)


def _production(params, h, l, i, norm=1.0):
    gamma = 1.0 - params.alpha - params.beta
    return norm * h**params.alpha * l**params.beta * i**gamma


def _draw_params(rng):
    alpha = rng.uniform(0.05, 0.6)
    beta = rng.uniform(0.05, 0.9 - alpha)
    share = rng.uniform(0.1, 0.9)
    return EconomyParams(
        alpha=alpha,
        beta=beta,
        l_bar=rng.uniform(0.2, 5.0),
        h_bar=rng.uniform(0.2, 5.0),
        informal_share=share,
    )


def test_baseline_output_matches_production_function():
    params = EconomyParams(alpha=0.3, beta=0.5, informal_share=0.4)
    state = solve_baseline(params)
    expected = _production(
        params, state.labor_high, state.labor_formal_low, state.labor_informal
    )
    assert abs(state.output - expected) < 1e-15
    assert all(abs(r) < 1e-12 for r in state.foc_residuals(params))


def test_baseline_wages_equal_marginal_products_by_finite_differences():
    rng = np.random.default_rng(60)
    h = 1e-7
    for _ in range(30):
        params = _draw_params(rng)
        state = solve_baseline(params)
        args = (state.labor_high, state.labor_formal_low, state.labor_informal)
        grads = []
        for j in range(3):
            bumped_up = list(args)
            bumped_dn = list(args)
            bumped_up[j] += h
            bumped_dn[j] -= h
            grads.append(
                (_production(params, *bumped_up) - _production(params, *bumped_dn))
                / (2.0 * h)
            )
        for grad, wage in zip(grads, (state.wage_high, state.wage_formal_low, state.wage_informal)):
            assert abs(grad - wage) < 1e-5 * max(1.0, abs(wage))


def test_multipliers_match_two_equilibrium_ratio():
    rng = np.random.default_rng(61)
    for _ in range(200):
        params = _draw_params(rng)
        shock = ImmigrationShock(eta=rng.uniform(0.0, 0.3), mu=rng.uniform(0.0, 0.3))
        m_i, m_l, m_h = shock_multipliers(params, shock)
        base = solve_baseline(params)
        after = shocked_equilibrium(params, shock)
        assert abs(m_i - after.wage_informal / base.wage_informal) < 1e-12 * m_i
        assert abs(m_l - after.wage_formal_low / base.wage_formal_low) < 1e-12 * m_l
        assert abs(m_h - after.wage_high / base.wage_high) < 1e-12 * m_h


def test_dominant_informal_inflow_sign_pattern():
    rng = np.random.default_rng(62)
    for _ in range(200):
        params = _draw_params(rng)
        eta = rng.uniform(0.0, 0.15)
        mu = eta + rng.uniform(1e-6, 0.2)
        m_i, _, m_h = shock_multipliers(params, ImmigrationShock(eta=eta, mu=mu))
        assert m_h > 1.0
        assert m_i < 1.0


def test_implied_delta_and_consistency_check():
    assert abs(implied_delta(0.02, 0.10, 0.45) - (0.02 * 0.55 + 0.10 * 0.45)) < 1e-15
    params = EconomyParams(alpha=0.3, beta=0.5, informal_share=0.45)
    consistent = ImmigrationShock(eta=0.02, mu=0.10, delta=implied_delta(0.02, 0.10, 0.45))
    shock_multipliers(params, consistent)  # passes the 1e-12 consistency gate
    with pytest.raises(ParameterError):
        shock_multipliers(params, ImmigrationShock(eta=0.02, mu=0.10, delta=0.09))


def test_border_town_closed_form_matches_bisection():
    rng = np.random.default_rng(63)
    for _ in range(100):
        params = BorderTownParams(
            phi=rng.uniform(0.1, 5.0),
            psi=rng.uniform(0.1, 5.0),
            tau=rng.uniform(0.0, 0.8),
            nu=rng.uniform(0.05, 0.95),
            rho=rng.uniform(0.05, 0.95),
            delta_penalty=rng.uniform(0.05, 0.95),
        )
        for with_refugees in (False, True):
            closed = solve_border_town(params, with_refugees=with_refugees).wage
            oracle = solve_border_town_bisection(params, with_refugees=with_refugees)
            assert abs(closed - oracle) < 1e-10 * closed
            residual = border_town_labor_residual(params, closed, with_refugees)
            assert abs(residual) < 1e-12


def test_border_town_wage_ratio_formula():
    params = BorderTownParams(phi=1.2, psi=0.7, tau=0.3, nu=0.6, rho=0.4, delta_penalty=0.5)
    w1 = solve_border_town(params, with_refugees=False).wage
    w2 = solve_border_town(params, with_refugees=True).wage
    expected_ratio = params.nu / (params.delta_penalty * params.rho + params.nu)
    assert abs(w2 / w1 - expected_ratio) < 1e-12
    assert w2 < w1


def test_border_town_budget_and_accounting():
    params = BorderTownParams(phi=1.0, psi=0.5, tau=0.25, nu=0.55, rho=0.3, delta_penalty=0.6)
    eq = solve_border_town(params, with_refugees=True)
    assert abs(eq.transfer - eq.wage * params.tau) < 1e-15
    assert abs(eq.native_consumption - eq.wage * params.nu) < 1e-15
    assert abs(eq.refugee_consumption - params.delta_penalty * eq.wage * params.rho) < 1e-15
    # labor demand identities
    assert abs(eq.effective_informal_labor - params.psi / eq.wage) < 1e-15
    assert abs(eq.effective_formal_labor - params.phi / (eq.wage * (1.0 + params.tau))) < 1e-15
    assert math.isfinite(eq.goods_market_residual)


def test_comparative_statics_report_signs_and_notes():
    params = EconomyParams(alpha=0.3, beta=0.5, informal_share=0.45)
    shock = ImmigrationShock(eta=0.02, mu=0.10)
    report = comparative_statics_report(params, shock)
    assert isinstance(report, ComparativeStaticsReport)
    assert report.mu_exceeds_eta
    assert report.signs["informal"] == -1
    assert report.signs["high"] == 1
    assert any("below one" in note for note in report.notes)
    rows = report.rows()
    assert [row["scenario"] for row in rows] == ["baseline", "shocked"]
    assert rows[0]["m_i"] == 1.0
    assert rows[1]["m_i"] == report.multipliers[0]


def test_report_csv_round_trips_floats(tmp_path):
    params = EconomyParams(alpha=0.3, beta=0.5)
    report = comparative_statics_report(params, ImmigrationShock(eta=0.02, mu=0.10))
    path = tmp_path / "report.csv"
    write_report_csv(report, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "scenario,w_i,w_l,w_h,m_i,m_l,m_h"
    shocked = lines[2].split(",")
    assert float(shocked[4]) == report.multipliers[0]
    assert float(shocked[6]) == report.multipliers[2]


def test_params_file_and_mapping_parsers(tmp_path):
    path = tmp_path / "params.ini"
    path.write_text(
        "# technology\n[economy]\nalpha = 0.3\nbeta = 0.5\ninformal_share = 0.45\n"
        "\n[shock]\neta = 0.02\nmu = 0.10\n"
        "\n[border_town]\nphi = 1.0\npsi = 0.5\ntau = 0.25\nnu = 0.55\nrho = 0.3\n"
        "delta_penalty = 0.6\n"
    )
    values = read_params_file(path)
    params = economy_params_from_mapping(values)
    assert params.alpha == 0.3 and params.informal_share == 0.45
    shock = shock_from_mapping(values)
    assert shock.eta == 0.02 and shock.mu == 0.10
    town = border_town_params_from_mapping(values)
    assert town.tau == 0.25


def test_parameter_validation_errors():
    with pytest.raises(ParameterError):
        EconomyParams(alpha=0.0, beta=0.5)
    with pytest.raises(ParameterError):
        EconomyParams(alpha=0.6, beta=0.5)  # alpha + beta >= 1
    with pytest.raises(ParameterError):
        EconomyParams(alpha=0.3, beta=0.5, informal_share=1.0)
    with pytest.raises(ParameterError):
        ImmigrationShock(eta=-0.1, mu=0.0)
    with pytest.raises(ParameterError):
        BorderTownParams(phi=1.0, psi=0.5, tau=-0.1, nu=0.5, rho=0.5, delta_penalty=0.5)
    with pytest.raises(ParameterError):
        solve_baseline(EconomyParams(alpha=0.3, beta=0.5), wage_normalization=0.0)
