"""Figure rendering for the report paths.

Figures are drawn with matplotlib's object-oriented Agg canvas, so no
interactive backend is touched and rendering works headless. Every
function writes a PNG next to the delimited data it visualizes and
returns the path it wrote. Output is deterministic for fixed inputs:
the PNG metadata is pinned so repeated runs are byte-identical.
"""

from __future__ import annotations

import os
from typing import Mapping

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .did import EstimateResult
from .synth import ScmSolution, SdidSolution

_PNG_METADATA = {"Software": "borderlab"}
_DPI = 150


def _save(fig: Figure, path) -> str:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    return os.fspath(path)


def _event_points(result: EstimateResult, reference_year: int):
    years = [reference_year]
    coefs = [0.0]
    errors = [0.0]
    for name, value in result.coefficients.items():
        if not name.startswith("effect_"):
            continue
        years.append(int(name.split("_")[1]))
        coefs.append(float(value))
        errors.append(1.96 * float(result.std_errors[name]))
    order = np.argsort(years)
    return (
        np.asarray(years)[order],
        np.asarray(coefs)[order],
        np.asarray(errors)[order],
    )


def event_study_figure(
    result: EstimateResult, treatment_year: int, reference_year: int, path
) -> str:
    """Render event-study coefficients with 95% bars.

    The reference year is drawn at zero without a bar; a vertical rule
    marks the treatment onset.
    """
    years, coefs, errors = _event_points(result, reference_year)
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.axvline(treatment_year - 0.5, color="0.3", linewidth=0.8, linestyle="--")
    ax.errorbar(
        years,
        coefs,
        yerr=errors,
        fmt="o",
        color="#1f4e79",
        ecolor="#1f4e79",
        capsize=3,
        markersize=4,
    )
    ax.set_xlabel("year")
    ax.set_ylabel("log wage effect")
    ax.set_title("Event-study coefficients (95% bars)")
    ax.set_xticks(years)
    fig.tight_layout()
    return _save(fig, path)


def paths_figure(solution: ScmSolution | SdidSolution, path, title: str) -> str:
    """Render treated versus synthetic mean log wage paths."""
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    years = solution.years
    ax.plot(years, solution.treated_path, color="#1f4e79", marker="o", markersize=3.5, label="treated")
    ax.plot(
        years,
        solution.synthetic_path,
        color="#b0552f",
        marker="s",
        markersize=3.5,
        linestyle="--",
        label="synthetic",
    )
    ax.axvline(solution.treatment_year - 0.5, color="0.3", linewidth=0.8, linestyle=":")
    ax.set_xlabel("year")
    ax.set_ylabel("mean log wage")
    ax.set_title(title)
    ax.set_xticks(years)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def truth_versus_estimate_figure(
    att_by_year: Mapping[int, float],
    result: EstimateResult,
    treatment_year: int,
    reference_year: int,
    path,
) -> str:
    """Render the injected effect path against event-study estimates."""
    years, coefs, errors = _event_points(result, reference_year)
    truth_years = sorted(int(y) for y in att_by_year)
    truth = [float(att_by_year[y]) for y in truth_years]
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.axvline(treatment_year - 0.5, color="0.3", linewidth=0.8, linestyle="--")
    ax.plot(truth_years, truth, color="#b0552f", drawstyle="steps-mid", label="injected effect")
    ax.errorbar(
        years,
        coefs,
        yerr=errors,
        fmt="o",
        color="#1f4e79",
        capsize=3,
        markersize=4,
        label="estimated",
    )
    ax.set_xlabel("year")
    ax.set_ylabel("log wage effect")
    ax.set_title("Injected versus estimated effect path")
    ax.set_xticks(truth_years)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
