"""End-to-end command line checks, run in process through main().

A module-scoped simulated panel backs the analysis commands; hand-built
files cover the aggregate placebo path and the error handling. File
outputs are checked for format (JSON keys, CSV headers, PNG signature)
and the pipeline manifest for byte-level determinism.
"""

import json
import math

import numpy as np
import pytest

from borderlab.cli import format_float, main, significance_stars
from borderlab.economy import EconomyParams, ImmigrationShock, shock_multipliers
from borderlab.panel import CSV_COLUMNS

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfg = out / "config.ini"
    cfg.write_text(
        "[dgp]\n"
        "n_workers_treated = 120\n"
        "n_workers_control = 180\n"
        "informal_fraction = 0.25\n"
    )
    assert main(["simulate", "--config", str(cfg), "--seed", "33", "--out", str(out)]) == 0
    return {
        "dir": out,
        "config": cfg,
        "panel": str(out / "panel.csv"),
        "ratios": str(out / "vz_ratio.csv"),
        "truth": str(out / "truth.json"),
    }


def _panel_args(sim):
    return ["--panel", sim["panel"], "--ratios", sim["ratios"]]


def test_simulate_outputs_and_determinism(sim, tmp_path, capsys):
    for name in ("panel.csv", "vz_ratio.csv", "truth.json", "summary.json"):
        assert (sim["dir"] / name).exists(), name
    truth = json.loads((sim["dir"] / "truth.json").read_text())
    assert "att_by_year" in truth and "cohort_effects" in truth

    rerun = tmp_path / "again"
    assert (
        main(["simulate", "--config", str(sim["config"]), "--seed", "33", "--out", str(rerun)])
        == 0
    )
    out = capsys.readouterr().out
    assert "summary statistics" in out
    for name in ("panel.csv", "vz_ratio.csv", "truth.json", "summary.json"):
        assert (rerun / name).read_bytes() == (sim["dir"] / name).read_bytes(), name


def test_estimate_json_with_truth_and_bias(sim, capsys, tmp_path):
    code = main(
        ["estimate", *_panel_args(sim), "--family", "twfe", "--format", "json",
         "--truth", sim["truth"], "--out", str(tmp_path)]
    )
    assert code == 0
    block = json.loads(capsys.readouterr().out)
    for key in ("family", "coef", "se", "p", "stars", "n", "n_clusters",
                "r2_adj", "rmse", "fixed_effects", "inference", "truth", "bias"):
        assert key in block, key
    assert block["family"] == "twfe"
    assert "treatment" in block["coef"]
    assert block["bias"] == pytest.approx(block["coef"]["treatment"] - block["truth"], abs=1e-9)
    saved = json.loads((tmp_path / "estimate_twfe.json").read_text())
    assert saved["coef"] == block["coef"]


def test_estimate_csv_format_and_dr_alias(sim, capsys):
    assert main(["estimate", *_panel_args(sim), "--family", "dr", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "term,estimate,std_error,p_value,stars"
    assert lines[1].startswith("treatment,")

    assert main(["estimate", *_panel_args(sim), "--family", "dr", "--format", "json"]) == 0
    block = json.loads(capsys.readouterr().out)
    assert block["family"] == "doubly_robust"
    assert block["trimmed"] >= 0


def test_estimate_pooled_with_interaction(sim, capsys):
    code = main(
        ["estimate", *_panel_args(sim), "--family", "pooled", "--treatment", "continuous",
         "--interact", "informal", "--format", "json"]
    )
    assert code == 0
    block = json.loads(capsys.readouterr().out)
    assert "exposure_pp" in block["coef"]
    assert "exposure_pp_x_informal" in block["coef"]
    assert block["fixed_effects"] == "state+year"


def test_estimate_table_output_has_stars_legend(sim, capsys):
    assert main(["estimate", *_panel_args(sim), "--family", "retention"]) == 0
    out = capsys.readouterr().out
    assert "family: retention" in out
    assert "stars: * p<0.1, ** p<0.05, *** p<0.01" in out
    assert "worker FE" in out and "year FE" in out


def test_event_study_writes_csv_png_json(sim, tmp_path, capsys):
    assert main(["event-study", *_panel_args(sim), "--out", str(tmp_path)]) == 0
    csv_lines = (tmp_path / "event_study.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "year,coefficient,std_error,ci_low,ci_high,p_value"
    years = [int(line.split(",")[0]) for line in csv_lines[1:]]
    assert years == sorted(years)
    assert 2013 not in years
    assert len(years) == 10
    assert (tmp_path / "event_study.png").read_bytes()[:8] == PNG_SIGNATURE
    block = json.loads((tmp_path / "event_study.json").read_text())
    assert block["family"] == "event_study"


def test_scm_and_sdid_outputs(sim, tmp_path, capsys):
    assert main(["scm", *_panel_args(sim), "--out", str(tmp_path)]) == 0
    scm = json.loads((tmp_path / "scm.json").read_text())
    assert set(scm["weights"]) == {"AC", "AP"}
    assert sum(scm["weights"].values()) == pytest.approx(1.0, abs=1e-6)
    assert scm["mspe"] >= 0.0
    paths = (tmp_path / "scm_paths.csv").read_text().strip().splitlines()
    assert paths[0] == "year,treated,synthetic"
    assert len(paths) == 12
    assert (tmp_path / "scm_paths.png").read_bytes()[:8] == PNG_SIGNATURE

    assert main(["sdid", *_panel_args(sim), "--out", str(tmp_path)]) == 0
    sdid = json.loads((tmp_path / "sdid.json").read_text())
    assert sdid["metadata"]["variant"] == "intercept_augmented_simplex"
    assert set(sdid["time_weights"]) == {str(y) for y in range(2008, 2014)}
    assert sum(sdid["time_weights"].values()) == pytest.approx(1.0, abs=1e-6)
    out = capsys.readouterr().out
    assert "unit weights:" in out and "time weights:" in out


def test_placebo_in_space_and_in_time(sim, tmp_path, capsys):
    assert main(
        ["placebo", *_panel_args(sim), "--mode", "in_space", "--out", str(tmp_path)]
    ) == 0
    payload = json.loads((tmp_path / "placebo_in_space.json").read_text())
    assert set(payload["results"]) == {"AC", "AP"}
    csv_lines = (tmp_path / "placebo_in_space.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "unit,role,estimate,std_error,p_value"
    assert len(csv_lines) == 3

    assert main(
        ["placebo", *_panel_args(sim), "--mode", "in_time", "--out", str(tmp_path)]
    ) == 0
    payload = json.loads((tmp_path / "placebo_in_time.json").read_text())
    assert set(payload["results"]) == {str(y) for y in range(2009, 2014)}


def test_placebo_scm_needs_enough_states(sim, tmp_path, capsys):
    code = main(["placebo", *_panel_args(sim), "--mode", "scm", "--out", str(tmp_path)])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def _aggregate_panel_csv(path):
    levels = {"RR": 7.2, "AC": 7.25, "AP": 7.3, "AM": 7.35}
    rows = []
    for state, level in levels.items():
        for w in (1, 2):
            for t, year in enumerate(range(2010, 2016)):
                wiggle = 0.003 * math.sin(t + w + len(state) + ord(state[0]))
                wage = 1000.0 * math.exp(level - 7.0 + 0.02 * t + wiggle)
                rows.append(
                    f"{state}W{w},{year},{state},{state}01,{wage:.4f},40,1,2510,56,"
                    f"0,0,0,white,30,24,hs"
                )
    path.write_text(",".join(CSV_COLUMNS) + "\n" + "\n".join(rows) + "\n")


def test_placebo_scm_ranks_units_on_a_four_state_panel(tmp_path, capsys):
    panel_path = tmp_path / "four_states.csv"
    _aggregate_panel_csv(panel_path)
    code = main(
        ["placebo", "--panel", str(panel_path), "--treated-state", "RR", "--no-censor",
         "--mode", "scm", "--out", str(tmp_path)]
    )
    assert code == 0
    payload = json.loads((tmp_path / "placebo_scm.json").read_text())
    assert set(payload["effects"]) == {"RR", "AC", "AP", "AM"}
    assert payload["rank_p_value"] == pytest.approx(payload["treated_rank"] / 4.0)
    assert "treated rank" in capsys.readouterr().out


def test_simulate_shock_mode_uses_config_mappings(tmp_path, capsys):
    cfg = tmp_path / "shock.ini"
    cfg.write_text(
        "[dgp]\n"
        "n_workers_treated = 40\n"
        "n_workers_control = 40\n"
        "informal_fraction = 0.25\n"
        "[economy]\n"
        "alpha = 0.3\n"
        "beta = 0.5\n"
        "[shock]\n"
        "eta = 0.02\n"
        "mu = 0.10\n"
        "[skill_map]\n"
        "college = informal\n"
        "hs = formal_low\n"
        "less_hs = high\n"
    )
    out = tmp_path / "shock_run"
    assert main(
        ["simulate", "--mode", "shock", "--config", str(cfg), "--seed", "5", "--out", str(out)]
    ) == 0
    truth = json.loads((out / "truth.json").read_text())
    m_i, m_l, m_h = shock_multipliers(
        EconomyParams(alpha=0.3, beta=0.5), ImmigrationShock(eta=0.02, mu=0.10)
    )
    cohorts = truth["cohort_effects"]
    assert cohorts["college"] == pytest.approx(math.log(m_i), abs=1e-9)
    assert cohorts["hs"] == pytest.approx(math.log(m_l), abs=1e-9)
    assert cohorts["less_hs"] == pytest.approx(math.log(m_h), abs=1e-9)
    assert cohorts["informal"] == pytest.approx(math.log(m_i), abs=1e-9)


def test_out_dir_falls_back_to_environment(tmp_path, monkeypatch, capsys):
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("BORDERLAB_OUT", str(env_dir))
    cfg = tmp_path / "tiny.ini"
    cfg.write_text("[dgp]\nn_workers_treated = 20\nn_workers_control = 20\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "1"]) == 0
    assert (env_dir / "panel.csv").exists()


def test_pipeline_is_deterministic_across_thread_counts(tmp_path, capsys):
    cfg = tmp_path / "pipe.ini"
    cfg.write_text(
        "[dgp]\n"
        "n_workers_treated = 100\n"
        "n_workers_control = 160\n"
    )
    run_a = tmp_path / "run_a"
    run_b = tmp_path / "run_b"
    assert main(
        ["pipeline", "--config", str(cfg), "--seed", "99", "--out", str(run_a),
         "--threads", "1"]
    ) == 0
    assert main(
        ["pipeline", "--config", str(cfg), "--seed", "99", "--out", str(run_b),
         "--threads", "8"]
    ) == 0
    manifest_a = (run_a / "manifest.json").read_bytes()
    manifest_b = (run_b / "manifest.json").read_bytes()
    assert manifest_a == manifest_b

    manifest = json.loads(manifest_a)
    assert manifest["tool"] == "borderlab"
    assert manifest["status"] == "ok"
    assert manifest["mode"] == "shock"
    assert manifest["seed"] == 99
    assert [s["index"] for s in manifest["stages"]] == list(range(1, 12))
    for stage in manifest["stages"]:
        for output in stage["outputs"]:
            assert set(output) == {"path", "sha256", "bytes"}
            assert (run_a / output["path"]).stat().st_size == output["bytes"]
            assert (run_b / output["path"]).exists()
    out = capsys.readouterr().out
    assert "[ 1/11] simulate" in out
    assert "manifest" in out


def test_thread_count_must_be_positive(sim):
    with pytest.raises(SystemExit) as excinfo:
        main(["estimate", *_panel_args(sim), "--threads", "0"])
    assert excinfo.value.code == 2


def test_missing_panel_file_is_a_clean_error(tmp_path, capsys):
    code = main(["estimate", "--panel", str(tmp_path / "absent.csv")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[dgp]\nn_wrkrs = 10\n")
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 1
    assert "unknown [dgp] key" in capsys.readouterr().err


def test_formatting_helpers():
    assert significance_stars(0.005) == "***"
    assert significance_stars(0.03) == "**"
    assert significance_stars(0.08) == "*"
    assert significance_stars(0.2) == ""
    assert format_float(0.1) == "0.1"
    assert format_float(1.0 / 3.0) == "0.333333333333"
    assert format_float(1234567.0) == "1234567"
