"""Command-line front end for simulation, estimation, and reporting.

Subcommands: ``simulate``, ``estimate``, ``event-study``, ``scm``,
``sdid``, ``placebo``, ``pipeline``. Common flags: ``--config PATH``,
``--seed N``, ``--out DIR``, ``--format json|csv|table``,
``--threads N``. The ``BORDERLAB_OUT`` environment variable supplies the
default output directory.

Every run is deterministic for a fixed seed: all stages execute
sequentially in a single thread (``--threads`` is accepted for
interface compatibility and recorded nowhere), floats in analysis
outputs are canonicalized to 12 significant digits, JSON keys are
sorted, and manifests carry content hashes but no timestamps.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from dataclasses import replace
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from . import dgp as dgp_mod
from . import did as did_mod
from . import economy as economy_mod
from . import figures as figures_mod
from . import panel as panel_mod
from . import synth as synth_mod


class CliError(ValueError):
    """A command cannot run with the given arguments or config."""


# ---------------------------------------------------------------------------
# serialization helpers


def significance_stars(p_value: float) -> str:
    """Star markers at the conventional p < 0.1 / 0.05 / 0.01 thresholds."""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def format_float(value: float) -> str:
    """Canonical 12-significant-digit rendering for analysis outputs."""
    return format(float(value), ".12g")


def _canonical(obj):
    """Recursively canonicalize floats so serialized output is stable."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(format_float(obj))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    return obj


def write_json(payload, path) -> str:
    text = json.dumps(_canonical(payload), indent=2, sort_keys=True) + "\n"
    with open(path, "w") as handle:
        handle.write(text)
    return os.fspath(path)


def write_table_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([c if isinstance(c, str) else format_float(c) for c in row])
    return os.fspath(path)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def result_block(result: did_mod.EstimateResult, family: str | None = None) -> dict:
    """JSON block for one estimate: coefficients, inference, fit stats."""
    p_values = {name: result.p_value(name) for name in result.coefficients}
    return {
        "family": family or str(result.diagnostics.get("family", "")),
        "coef": dict(result.coefficients),
        "se": dict(result.std_errors),
        "p": p_values,
        "stars": {name: significance_stars(p) for name, p in p_values.items()},
        "n": result.n_obs,
        "n_clusters": result.n_clusters,
        "r2_adj": result.r2_adjusted,
        "rmse": result.rmse,
        "trimmed": int(result.diagnostics.get("trimmed_rows", 0)),
        "fixed_effects": str(result.diagnostics.get("fixed_effects", "")),
        "inference": "cluster_robust_cr0_normal_approx",
    }


def _print_result_table(result: did_mod.EstimateResult, title: str, stream) -> None:
    print(title, file=stream)
    width = max((len(n) for n in result.coefficients), default=8) + 2
    for name, value in result.coefficients.items():
        p = result.p_value(name)
        stars = significance_stars(p)
        se = result.std_errors[name]
        print(f"  {name:<{width}} {format_float(value):>18}{stars:<4} ({format_float(se)})", file=stream)
    fe = result.diagnostics.get("fixed_effects", "")
    if fe:
        for dim in str(fe).split("+"):
            print(f"  {dim + ' FE':<{width}} {'yes':>18}", file=stream)
    print(f"  {'N':<{width}} {result.n_obs:>18}", file=stream)
    print(f"  {'N clusters':<{width}} {result.n_clusters:>18}", file=stream)
    print(f"  {'R2 adj':<{width}} {format_float(result.r2_adjusted):>18}", file=stream)
    print(f"  {'RMSE':<{width}} {format_float(result.rmse):>18}", file=stream)
    print("  stars: * p<0.1, ** p<0.05, *** p<0.01", file=stream)


def _emit_result(result, family, args, out_dir, stem, stream, bias_block=None) -> list[str]:
    """Emit one estimate in the requested format; returns files written."""
    block = result_block(result, family)
    if bias_block:
        block.update(bias_block)
    written = []
    if args.format == "json":
        print(json.dumps(_canonical(block), indent=2, sort_keys=True), file=stream)
    elif args.format == "csv":
        header = ["term", "estimate", "std_error", "p_value", "stars"]
        writer = csv.writer(stream)
        writer.writerow(header)
        for name in result.coefficients:
            writer.writerow(
                [
                    name,
                    format_float(result.coefficients[name]),
                    format_float(result.std_errors[name]),
                    format_float(result.p_value(name)),
                    significance_stars(result.p_value(name)),
                ]
            )
    else:
        _print_result_table(result, f"family: {family}", stream)
        if bias_block:
            print(f"  truth {format_float(bias_block['truth'])}  bias {format_float(bias_block['bias'])}", file=stream)
    if out_dir is not None:
        path = os.path.join(out_dir, f"{stem}.json")
        write_json(block, path)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# config parsing


def _read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    read = parser.read([path])
    if not read:
        raise CliError(f"config file {path!r} could not be read")
    return parser


def _parse_mapping(text: str, value_type=float) -> dict:
    """Parse ``key:value,key:value`` pairs."""
    out = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        key, sep, value = chunk.partition(":")
        if not sep:
            raise CliError(f"expected key:value pairs, got {text!r}")
        out[key.strip()] = value_type(value.strip())
    return out


def _parse_tuple(text: str, value_type=float) -> tuple:
    return tuple(value_type(x.strip()) for x in text.split(",") if x.strip())


def _parse_groups(text: str) -> tuple:
    return tuple(_parse_tuple(group) for group in text.split(";"))


_DGP_INT_KEYS = ("n_workers_treated", "n_workers_control", "treatment_year", "seed")
_DGP_FLOAT_KEYS = (
    "true_effect_log_points",
    "noise_sd",
    "worker_effect_sd",
    "year_effect_drift",
    "attrition_rate",
    "retention_rate",
    "retention_effect",
    "informal_fraction",
    "exposure_effect_activity",
    "exposure_effect_occupation",
    "base_move_rate",
    "mover_uplift",
    "tenure_max_months",
)
_DGP_STR_KEYS = ("effect_profile", "treated_state")
_DGP_MAPPING_KEYS = ("education_effects", "education_level_effects", "education_trend_effects")


def _dgp_kwargs_from_section(section: Mapping[str, str]) -> dict:
    kwargs: dict = {}
    for key, raw in section.items():
        if key in _DGP_INT_KEYS:
            kwargs[key] = int(raw)
        elif key in _DGP_FLOAT_KEYS:
            kwargs[key] = float(raw)
        elif key in _DGP_STR_KEYS:
            kwargs[key] = raw.strip()
        elif key in _DGP_MAPPING_KEYS:
            text = raw.strip()
            if text == "defaults" and key == "education_effects":
                kwargs[key] = dict(dgp_mod.EDUCATION_COHORT_DEFAULTS)
            else:
                kwargs[key] = _parse_mapping(text)
        elif key == "years":
            lo, _, hi = raw.partition("-")
            kwargs[key] = (int(lo), int(hi))
        elif key == "wage_level_means" or key == "gender_mix":
            kwargs[key] = _parse_tuple(raw)
        elif key == "age_range":
            kwargs[key] = tuple(int(x) for x in _parse_tuple(raw, int))
        elif key == "municipalities":
            kwargs[key] = tuple(int(x) for x in _parse_tuple(raw, int))
        elif key == "control_states":
            kwargs[key] = tuple(x.strip() for x in raw.split(","))
        elif key in ("education_mix", "race_mix"):
            kwargs[key] = _parse_groups(raw)
        elif key == "exposure_path":
            kwargs[key] = {int(y): v for y, v in _parse_mapping(raw).items()}
        else:
            raise CliError(f"unknown [dgp] key {key!r}")
    return kwargs


def _build_dgp_config(config: configparser.ConfigParser | None, seed: int | None) -> dgp_mod.DgpConfig:
    kwargs: dict = {}
    if config is not None and config.has_section("dgp"):
        kwargs = _dgp_kwargs_from_section(config["dgp"])
    if seed is not None:
        kwargs["seed"] = int(seed)
    return dgp_mod.DgpConfig(**kwargs)


def _shock_inputs(config: configparser.ConfigParser | None):
    """Economy parameters, shock, and skill map for shock-consistent runs."""
    econ_section = dict(config["economy"]) if config is not None and config.has_section("economy") else {}
    shock_section = dict(config["shock"]) if config is not None and config.has_section("shock") else {}
    econ_section.setdefault("alpha", "0.3")
    econ_section.setdefault("beta", "0.5")
    shock_section.setdefault("eta", "0.02")
    shock_section.setdefault("mu", "0.10")
    params = economy_mod.economy_params_from_mapping(econ_section)
    shock = economy_mod.shock_from_mapping(shock_section)
    skill_map = None
    if config is not None and config.has_section("skill_map"):
        skill_map = {k: v.strip() for k, v in config["skill_map"].items()}
    return params, shock, skill_map


# ---------------------------------------------------------------------------
# shared command plumbing


def _resolve_out_dir(args, default_to_cwd: bool = True) -> str | None:
    out = args.out or os.environ.get("BORDERLAB_OUT")
    if out is None:
        if not default_to_cwd:
            return None
        out = "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_panel_for_analysis(args) -> panel_mod.Panel:
    loaded = panel_mod.load_csv(
        args.panel,
        ratio_path=args.ratios,
        treatment_year=args.treatment_year,
        treated_state=args.treated_state,
    )
    if not args.no_censor:
        loaded = panel_mod.apply_sample_rules(
            loaded,
            lower_quantile=args.censor_lower,
            upper_quantile=args.censor_upper,
            winsorize=args.winsorize,
        )
    return loaded


def _formal_subset(loaded: panel_mod.Panel) -> panel_mod.Panel:
    """Registry-style view: informal rows excluded when the panel has any."""
    if loaded.has_informal:
        return loaded.subset(loaded.column("informal").astype(np.int64) == 0)
    return loaded


def _att_truth_scalar(loaded: panel_mod.Panel, att_by_year: Mapping[int, float]) -> float:
    """Observation-weighted mean injected effect over treated post rows."""
    formal = _formal_subset(loaded)
    years = formal.column("year")
    treated = (formal.column("state") == formal.treated_state) & (
        years >= formal.treatment_year
    )
    weight_total = 0
    acc = 0.0
    for year, value in att_by_year.items():
        if int(year) < formal.treatment_year:
            continue
        n = int(np.sum(treated & (years == int(year))))
        acc += n * float(value)
        weight_total += n
    if weight_total == 0:
        raise CliError("panel has no treated post-period rows to compare against truth")
    return acc / weight_total


def _load_truth(path) -> dict:
    with open(path) as handle:
        payload = json.load(handle)
    payload["att_by_year"] = {int(y): float(v) for y, v in payload["att_by_year"].items()}
    return payload


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    config = _read_config(args.config) if args.config else None
    dgp_config = _build_dgp_config(config, args.seed)
    if args.mode == "shock":
        params, shock, skill_map = _shock_inputs(config)
        generated, truth = dgp_mod.generate_shock_consistent(
            dgp_config, params, shock, skill_map=skill_map, informal_effect_scope=args.informal_scope
        )
    else:
        generated, truth = dgp_mod.generate(dgp_config)
    out_dir = _resolve_out_dir(args)
    panel_path = os.path.join(out_dir, "panel.csv")
    ratio_path = os.path.join(out_dir, "vz_ratio.csv")
    truth_path = os.path.join(out_dir, "truth.json")
    panel_mod.write_csv(generated, panel_path)
    panel_mod.write_ratio_csv(generated.vz_ratio, ratio_path)
    write_json(truth.to_json_dict(), truth_path)

    stats = dgp_mod.summary_stats(generated)
    summary_path = os.path.join(out_dir, "summary.json")
    write_json(stats, summary_path)
    print(f"wrote {panel_path}, {ratio_path}, {truth_path}, {summary_path}")
    snapshot = generated.treatment_year - 1
    print(f"summary statistics, snapshot year {snapshot}")
    print(f"  {'':<24}{'treated':>12}{'control':>12}")
    labels = (
        ("mean monthly wage", "mean_wage"),
        ("mean age", "mean_age"),
        ("female share", "female_share"),
        ("share less than HS", "share_less_hs"),
        ("share HS", "share_hs"),
        ("share college", "share_college"),
        ("workers observed", "n_workers"),
    )
    for label, key in labels:
        treated_v = stats["treated"][key]
        control_v = stats["control"][key]
        print(f"  {label:<24}{treated_v:>12.4f}{control_v:>12.4f}")
    return 0


_FAMILY_ALIASES = {
    "twfe": "twfe",
    "dr": "doubly_robust",
    "doubly_robust": "doubly_robust",
    "pooled": "pooled_ols",
    "pooled_ols": "pooled_ols",
    "retention": "retention",
    "mover": "mover",
}


def cmd_estimate(args) -> int:
    family = _FAMILY_ALIASES.get(args.family)
    if family is None:
        raise CliError(f"unknown family {args.family!r}")
    loaded = _load_panel_for_analysis(args)
    analysis_panel = loaded if (args.keep_informal or family == "pooled_ols") else _formal_subset(loaded)

    if family == "pooled_ols":
        spec = did_mod.EstimationSpec(
            treatment=args.treatment,
            family="pooled_ols",
            fixed_effects=("state", "year"),
            cluster="state",
            interactions=args.interact,
        )
        result = did_mod.pooled_ols_did(analysis_panel, spec)
    else:
        spec = did_mod.EstimationSpec(
            treatment=args.treatment,
            cluster=args.cluster,
            trim_quantile=args.trim_quantile,
        )
        if family == "twfe":
            result = did_mod.twfe_did(analysis_panel, spec)
        elif family == "doubly_robust":
            result = did_mod.doubly_robust_did(analysis_panel, spec)
        elif family == "retention":
            result = did_mod.retention_lpm(analysis_panel, spec)
        else:
            result = did_mod.mover_lpm(analysis_panel, spec)

    bias_block = None
    if args.truth:
        truth = _load_truth(args.truth)
        treatment_term = "treatment" if args.treatment == "binary" else "exposure_pp"
        if treatment_term in result.coefficients and family in ("twfe", "doubly_robust"):
            truth_value = _att_truth_scalar(loaded, truth["att_by_year"])
            bias_block = {
                "truth": truth_value,
                "bias": result.coefficient(treatment_term) - truth_value,
            }
    out_dir = _resolve_out_dir(args, default_to_cwd=False)
    _emit_result(result, family, args, out_dir, f"estimate_{family}", sys.stdout, bias_block)
    return 0


def cmd_event_study(args) -> int:
    loaded = _formal_subset(_load_panel_for_analysis(args))
    spec = did_mod.EstimationSpec(family="event_study", reference_year=args.reference_year)
    result = did_mod.event_study(loaded, spec)
    out_dir = _resolve_out_dir(args)

    rows = []
    for name, value in sorted(result.coefficients.items()):
        year = int(name.split("_")[1])
        lo, hi = result.confidence_interval(name)
        rows.append(
            (
                str(year),
                format_float(value),
                format_float(result.std_errors[name]),
                format_float(lo),
                format_float(hi),
                format_float(result.p_value(name)),
            )
        )
    rows.sort(key=lambda r: int(r[0]))
    csv_path = write_table_csv(
        os.path.join(out_dir, "event_study.csv"),
        ("year", "coefficient", "std_error", "ci_low", "ci_high", "p_value"),
        rows,
    )
    png_path = figures_mod.event_study_figure(
        result, loaded.treatment_year, args.reference_year, os.path.join(out_dir, "event_study.png")
    )
    json_path = os.path.join(out_dir, "event_study.json")
    write_json(result_block(result, "event_study"), json_path)
    if args.format == "table":
        _print_result_table(result, "family: event_study", sys.stdout)
    print(f"wrote {csv_path}, {png_path}, {json_path}")
    return 0


def _synth_outputs(solution, out_dir, stem, title, extra: dict | None = None) -> list[str]:
    payload = {
        "weights": solution.weight_map(),
        "mspe": solution.mspe,
        "effect": solution.effect,
        "path": solution.path_rows(),
    }
    if extra:
        payload.update(extra)
    json_path = write_json(payload, os.path.join(out_dir, f"{stem}.json"))
    csv_path = write_table_csv(
        os.path.join(out_dir, f"{stem}_paths.csv"),
        ("year", "treated", "synthetic"),
        [(str(int(y)), format_float(t), format_float(s)) for y, t, s in solution.path_rows()],
    )
    png_path = figures_mod.paths_figure(solution, os.path.join(out_dir, f"{stem}_paths.png"), title)
    return [json_path, csv_path, png_path]


def cmd_scm(args) -> int:
    loaded = _formal_subset(_load_panel_for_analysis(args))
    solution = synth_mod.scm_fit(synth_mod.aggregate_states(loaded))
    out_dir = _resolve_out_dir(args)
    files = _synth_outputs(solution, out_dir, "scm", "Synthetic control: mean log wage")
    print("donor weights:")
    for donor, weight in solution.weight_map().items():
        print(f"  {donor:<8}{format_float(weight)}")
    print(f"pre-period MSPE {format_float(solution.mspe)}")
    print(f"effect {format_float(solution.effect)}")
    print("wrote " + ", ".join(files))
    return 0


def cmd_sdid(args) -> int:
    loaded = _formal_subset(_load_panel_for_analysis(args))
    solution = synth_mod.sdid_fit(synth_mod.aggregate_states(loaded), ridge=args.ridge)
    out_dir = _resolve_out_dir(args)
    extra = {
        "time_weights": {str(y): w for y, w in solution.time_weights.items()},
        "metadata": dict(solution.metadata),
    }
    files = _synth_outputs(solution, out_dir, "sdid", "Synthetic DiD: mean log wage", extra)
    print("unit weights:")
    for donor, weight in solution.weight_map().items():
        print(f"  {donor:<8}{format_float(weight)}")
    print("time weights:")
    for year, weight in sorted(solution.time_weights.items()):
        print(f"  {year}    {format_float(weight)}")
    print(f"effect {format_float(solution.effect)}")
    print("wrote " + ", ".join(files))
    return 0


def cmd_placebo(args) -> int:
    loaded = _load_panel_for_analysis(args)
    out_dir = _resolve_out_dir(args)
    rows: list[tuple] = []
    payload: dict = {"mode": args.mode}
    if args.mode == "scm":
        report = synth_mod.scm_placebo(synth_mod.aggregate_states(_formal_subset(loaded)))
        payload["effects"] = dict(report.effects)
        payload["treated_rank"] = report.treated_rank
        payload["rank_p_value"] = report.rank_p_value
        for unit, effect in sorted(report.effects.items()):
            tag = "treated" if unit == report.treated_state else "placebo"
            rows.append((unit, tag, format_float(effect), "", ""))
        header = ("unit", "role", "effect", "std_error", "p_value")
        print(f"treated rank {report.treated_rank} of {report.n_units} "
              f"(rank p-value {format_float(report.rank_p_value)})")
    else:
        results = did_mod.placebo_suite(_formal_subset(loaded), args.mode)
        payload["results"] = {unit: result_block(r, "twfe") for unit, r in results.items()}
        header = ("unit", "role", "estimate", "std_error", "p_value")
        for unit, result in sorted(results.items()):
            rows.append(
                (
                    unit,
                    "placebo",
                    format_float(result.coefficient("treatment")),
                    format_float(result.std_error("treatment")),
                    format_float(result.p_value("treatment")),
                )
            )
            print(
                f"placebo {unit}: estimate {format_float(result.coefficient('treatment'))} "
                f"(se {format_float(result.std_error('treatment'))})"
            )
    csv_path = write_table_csv(os.path.join(out_dir, f"placebo_{args.mode}.csv"), header, rows)
    json_path = write_json(payload, os.path.join(out_dir, f"placebo_{args.mode}.json"))
    print(f"wrote {csv_path}, {json_path}")
    return 0


# ---------------------------------------------------------------------------
# pipeline


_PIPELINE_DEFAULTS = {
    "mode": "shock",
    "informal_fraction": 0.2,
    "skill_map": {"college": "informal", "hs": "formal_low", "less_hs": "high"},
}


def _pipeline_simulate(config, seed):
    dgp_config = _build_dgp_config(config, seed)
    mode = _PIPELINE_DEFAULTS["mode"]
    if config is not None and config.has_section("pipeline"):
        mode = config["pipeline"].get("mode", mode).strip()
    if mode not in ("base", "shock"):
        raise CliError(f"[pipeline] mode must be base or shock, got {mode!r}")
    if mode == "shock":
        if dgp_config.informal_fraction == 0.0:
            dgp_config = replace(
                dgp_config, informal_fraction=_PIPELINE_DEFAULTS["informal_fraction"]
            )
        params, shock, skill_map = _shock_inputs(config)
        if skill_map is None:
            skill_map = dict(_PIPELINE_DEFAULTS["skill_map"])
        generated, truth = dgp_mod.generate_shock_consistent(
            dgp_config, params, shock, skill_map=skill_map
        )
    else:
        generated, truth = dgp_mod.generate(dgp_config)
    return generated, truth, dgp_config, mode


def cmd_pipeline(args) -> int:
    config = _read_config(args.config) if args.config else None
    out_dir = _resolve_out_dir(args)
    stages: list[dict] = []
    comparison_rows: list[tuple[str, float, float | None]] = []

    def record(name: str, files: list[str]) -> None:
        index = len(stages) + 1
        print(f"[{index:2d}/11] {name}")
        outputs = []
        for path in files:
            rel = os.path.relpath(path, out_dir)
            outputs.append(
                {"path": rel, "sha256": sha256_file(path), "bytes": os.path.getsize(path)}
            )
            print(f"        {rel}")
        stages.append({"index": index, "name": name, "outputs": outputs})

    manifest_path = os.path.join(out_dir, "manifest.json")
    seed = args.seed
    try:
        # stage 1: simulate
        generated, truth, dgp_config, mode = _pipeline_simulate(config, seed)
        panel_path = os.path.join(out_dir, "panel.csv")
        ratio_path = os.path.join(out_dir, "vz_ratio.csv")
        truth_path = os.path.join(out_dir, "truth.json")
        summary_path = os.path.join(out_dir, "summary.json")
        panel_mod.write_csv(generated, panel_path)
        panel_mod.write_ratio_csv(generated.vz_ratio, ratio_path)
        write_json(truth.to_json_dict(), truth_path)
        write_json(dgp_mod.summary_stats(generated), summary_path)
        record("simulate", [panel_path, ratio_path, truth_path, summary_path])

        censored = panel_mod.apply_sample_rules(generated)
        formal = _formal_subset(censored)
        att_truth = _att_truth_scalar(censored, truth.att_by_year)

        # stage 2: main DiD, binary and continuous treatment
        twfe = did_mod.twfe_did(formal)
        dr = did_mod.doubly_robust_did(formal)
        twfe_cont = did_mod.twfe_did(formal, did_mod.EstimationSpec(treatment="continuous"))
        main_payload = {
            "twfe_binary": result_block(twfe, "twfe"),
            "doubly_robust_binary": result_block(dr, "doubly_robust"),
            "twfe_continuous": result_block(twfe_cont, "twfe"),
            "truth_att": att_truth,
        }
        main_path = write_json(main_payload, os.path.join(out_dir, "did_main.json"))
        record("main difference-in-differences", [main_path])
        comparison_rows.append(("twfe_binary.treatment", twfe.coefficient("treatment"), att_truth))
        comparison_rows.append(
            ("doubly_robust_binary.treatment", dr.coefficient("treatment"), att_truth)
        )
        if truth.continuous_per_pp is not None:
            comparison_rows.append(
                (
                    "twfe_continuous.exposure_pp",
                    twfe_cont.coefficient("exposure_pp"),
                    truth.continuous_per_pp,
                )
            )

        # stage 3: retention linear probability model
        retention = did_mod.retention_lpm(formal)
        retention_path = write_json(
            result_block(retention, "retention_lpm"), os.path.join(out_dir, "retention.json")
        )
        record("retention linear probability model", [retention_path])
        retention_truth = float(dgp_config.retention_effect)
        comparison_rows.append(
            ("retention.treatment", retention.coefficient("treatment"), retention_truth)
        )

        # stage 4: heterogeneity by education
        education_split = did_mod.heterogeneity_split(censored, "education")
        education_payload = {
            "dimension": "education",
            "results": {k: result_block(r, "twfe") for k, r in education_split.items()},
            "cohort_truth": {
                k: v for k, v in truth.cohort_effects.items() if k in education_split
            },
        }
        education_path = write_json(
            education_payload, os.path.join(out_dir, "heterogeneity_education.json")
        )
        record("heterogeneity by education", [education_path])
        for level, result in education_split.items():
            truth_value = truth.cohort_effects.get(level)
            comparison_rows.append(
                (f"education.{level}.treatment", result.coefficient("treatment"), truth_value)
            )

        # stage 5: heterogeneity by sector exposure
        exposure_payload = {}
        for dimension in ("exposed_activity", "exposed_occupation"):
            split = did_mod.heterogeneity_split(censored, dimension)
            exposure_payload[dimension] = {
                k: result_block(r, "twfe") for k, r in split.items()
            }
        exposure_path = write_json(
            exposure_payload, os.path.join(out_dir, "heterogeneity_exposure.json")
        )
        record("heterogeneity by sector exposure", [exposure_path])

        # stage 6: occupation switching (mover) linear probability model
        mover = did_mod.mover_lpm(formal)
        mover_path = write_json(
            result_block(mover, "mover_lpm"), os.path.join(out_dir, "mover.json")
        )
        record("occupation switching linear probability model", [mover_path])
        comparison_rows.append(("mover.treatment", mover.coefficient("treatment"), None))

        # stage 7: pooled exposure regression with the informal interaction
        pooled_spec = did_mod.EstimationSpec(
            treatment="continuous",
            family="pooled_ols",
            fixed_effects=("state", "year"),
            cluster="state",
            interactions="informal" if censored.has_informal else None,
        )
        pooled = did_mod.pooled_ols_did(censored, pooled_spec)
        pooled_path = write_json(
            result_block(pooled, "pooled_ols"), os.path.join(out_dir, "pooled_informal.json")
        )
        record("pooled exposure regression", [pooled_path])
        if "exposure_pp_x_informal" in pooled.coefficients:
            comparison_rows.append(
                (
                    "pooled.exposure_pp_x_informal",
                    pooled.coefficient("exposure_pp_x_informal"),
                    None,
                )
            )

        # stage 8: event study
        event_spec = did_mod.EstimationSpec(
            family="event_study", reference_year=generated.treatment_year - 1
        )
        event = did_mod.event_study(formal, event_spec)
        event_rows = []
        for name in sorted(event.coefficients, key=lambda s: int(s.split("_")[1])):
            year = int(name.split("_")[1])
            lo, hi = event.confidence_interval(name)
            event_rows.append(
                (
                    str(year),
                    format_float(event.coefficients[name]),
                    format_float(event.std_errors[name]),
                    format_float(lo),
                    format_float(hi),
                    format_float(event.p_value(name)),
                )
            )
        event_csv = write_table_csv(
            os.path.join(out_dir, "event_study.csv"),
            ("year", "coefficient", "std_error", "ci_low", "ci_high", "p_value"),
            event_rows,
        )
        event_png = figures_mod.event_study_figure(
            event,
            generated.treatment_year,
            generated.treatment_year - 1,
            os.path.join(out_dir, "event_study.png"),
        )
        event_json = write_json(
            result_block(event, "event_study"), os.path.join(out_dir, "event_study.json")
        )
        record("event study", [event_csv, event_png, event_json])
        post_mean = did_mod.event_study_post_mean(event, generated.treatment_year)
        comparison_rows.append(("event_study.post_mean", post_mean, att_truth))

        # stage 9: placebo suite
        placebo_rows = []
        placebo_payload: dict = {}
        for placebo_mode in ("in_space", "in_time"):
            results = did_mod.placebo_suite(formal, placebo_mode)
            placebo_payload[placebo_mode] = {
                unit: result_block(r, "twfe") for unit, r in results.items()
            }
            for unit, result in sorted(results.items()):
                placebo_rows.append(
                    (
                        placebo_mode,
                        unit,
                        format_float(result.coefficient("treatment")),
                        format_float(result.std_error("treatment")),
                        format_float(result.p_value("treatment")),
                    )
                )
        placebo_csv = write_table_csv(
            os.path.join(out_dir, "placebo.csv"),
            ("mode", "unit", "estimate", "std_error", "p_value"),
            placebo_rows,
        )
        placebo_json = write_json(placebo_payload, os.path.join(out_dir, "placebo.json"))
        record("placebo suite", [placebo_csv, placebo_json])

        # stage 10: synthetic control
        aggregate = synth_mod.aggregate_states(formal)
        scm = synth_mod.scm_fit(aggregate)
        scm_files = _synth_outputs(scm, out_dir, "scm", "Synthetic control: mean log wage")
        record("synthetic control", scm_files)
        post_att = [v for y, v in truth.att_by_year.items() if int(y) >= generated.treatment_year]
        scm_truth = float(np.mean(post_att))
        comparison_rows.append(("scm.effect", scm.effect, scm_truth))

        # stage 11: synthetic difference-in-differences and the closing report
        sdid = synth_mod.sdid_fit(aggregate)
        sdid_files = _synth_outputs(
            sdid,
            out_dir,
            "sdid",
            "Synthetic DiD: mean log wage",
            {
                "time_weights": {str(y): w for y, w in sdid.time_weights.items()},
                "metadata": dict(sdid.metadata),
            },
        )
        comparison_rows.append(("sdid.effect", sdid.effect, scm_truth))
        compare_csv = write_table_csv(
            os.path.join(out_dir, "truth_vs_estimate.csv"),
            ("metric", "estimate", "truth", "bias"),
            [
                (
                    metric,
                    format_float(estimate),
                    "" if truth_value is None else format_float(truth_value),
                    "" if truth_value is None else format_float(estimate - truth_value),
                )
                for metric, estimate, truth_value in comparison_rows
            ],
        )
        compare_png = figures_mod.truth_versus_estimate_figure(
            truth.att_by_year,
            event,
            generated.treatment_year,
            generated.treatment_year - 1,
            os.path.join(out_dir, "truth_vs_estimate.png"),
        )
        record(
            "synthetic difference-in-differences and closing report",
            sdid_files + [compare_csv, compare_png],
        )
    except Exception as exc:
        manifest = {
            "tool": "borderlab",
            "version": __version__,
            "seed": dgp_config.seed if "dgp_config" in locals() else seed,
            "status": "failed",
            "failed_after_stage": len(stages),
            "error": f"{type(exc).__name__}: {exc}",
            "stages": stages,
        }
        write_json(manifest, manifest_path)
        print(f"pipeline failed after stage {len(stages)}: {exc}", file=sys.stderr)
        return 1

    manifest = {
        "tool": "borderlab",
        "version": __version__,
        "seed": dgp_config.seed,
        "mode": mode,
        "status": "ok",
        "stages": stages,
        "notes": {
            "execution": "sequential single-thread; --threads accepted for compatibility",
            "p_values": "normal approximation on cluster-robust t statistics",
            "floats": "12 significant digits in analysis outputs",
        },
    }
    write_json(manifest, manifest_path)
    print(f"manifest {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="sectioned key=value config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory (default $BORDERLAB_OUT or cwd)")
    parser.add_argument(
        "--format", choices=("json", "csv", "table"), default="table", help="stdout format"
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="accepted for interface compatibility; execution is single-threaded",
    )


def _add_panel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--panel", required=True, help="panel CSV path")
    parser.add_argument("--ratios", help="exposure ratio CSV path")
    parser.add_argument("--treatment-year", type=int, default=2014)
    parser.add_argument("--treated-state", help="treated state code (inferred from ratios if omitted)")
    parser.add_argument("--no-censor", action="store_true", help="skip the wage sampling rules")
    parser.add_argument("--winsorize", action="store_true", help="clamp tails instead of dropping")
    parser.add_argument("--censor-lower", type=float, default=0.0025)
    parser.add_argument("--censor-upper", type=float, default=0.9975)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="borderlab",
        description="Simulation and estimation toolkit for border-state labor market studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic panel with ground truth")
    _add_common_flags(p_sim)
    p_sim.add_argument("--mode", choices=("base", "shock"), default="base")
    p_sim.add_argument(
        "--informal-scope",
        choices=("exposed_activity", "all_informal"),
        default="exposed_activity",
        help="which informal rows carry the informal multiplier in shock mode",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate", help="run one estimator family on a panel")
    _add_common_flags(p_est)
    _add_panel_flags(p_est)
    p_est.add_argument(
        "--family",
        default="twfe",
        choices=sorted(_FAMILY_ALIASES),
        help="estimator family",
    )
    p_est.add_argument("--treatment", choices=("binary", "continuous"), default="binary")
    p_est.add_argument("--cluster", choices=("municipality", "state"), default="municipality")
    p_est.add_argument("--trim-quantile", type=float, default=0.9975)
    p_est.add_argument("--interact", help="0/1 column interacted with treatment (pooled family)")
    p_est.add_argument("--keep-informal", action="store_true", help="keep informal rows in wage regressions")
    p_est.add_argument("--truth", help="ground-truth JSON; adds truth and bias to the report")
    p_est.set_defaults(func=cmd_estimate)

    p_event = sub.add_parser("event-study", help="per-year effects with figure and CSV")
    _add_common_flags(p_event)
    _add_panel_flags(p_event)
    p_event.add_argument("--reference-year", type=int, default=2013)
    p_event.set_defaults(func=cmd_event_study)

    p_scm = sub.add_parser("scm", help="synthetic control on state aggregates")
    _add_common_flags(p_scm)
    _add_panel_flags(p_scm)
    p_scm.set_defaults(func=cmd_scm)

    p_sdid = sub.add_parser("sdid", help="synthetic difference-in-differences")
    _add_common_flags(p_sdid)
    _add_panel_flags(p_sdid)
    p_sdid.add_argument("--ridge", type=float, default=1e-6)
    p_sdid.set_defaults(func=cmd_sdid)

    p_plac = sub.add_parser("placebo", help="placebo suites in space, time, or donors")
    _add_common_flags(p_plac)
    _add_panel_flags(p_plac)
    p_plac.add_argument("--mode", choices=("in_space", "in_time", "scm"), default="in_space")
    p_plac.set_defaults(func=cmd_placebo)

    p_pipe = sub.add_parser("pipeline", help="full simulate-estimate-report run")
    _add_common_flags(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (
        CliError,
        economy_mod.ParameterError,
        panel_mod.PanelError,
        did_mod.EstimationError,
        synth_mod.SynthError,
        dgp_mod.DgpError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
