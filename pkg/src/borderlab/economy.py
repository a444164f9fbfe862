"""Closed-form equilibria for a three-input regional economy and a
two-sector border town, with comparative statics for a labor-supply shock.

The regional economy produces with complementary high-skill labor and two
substitutable lower tiers (formal low-skill and informal). Competitive
first-order conditions pin down relative wages; a supply shock that
expands the two lower tiers moves wages through closed-form multipliers.
The border-town block adds a formal/informal duopoly with a payroll tax
recycled as a lump-sum transfer, used to study a refugee labor inflow
with a productivity penalty.

All solvers are exact; the test suite re-derives every output through
independent routes (direct first-order-condition evaluation, bisection
on the market-clearing residual).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping

from .numerics import bisect_root

DELTA_CONSISTENCY_TOL = 1e-12

#: Keys understood by :func:`read_params_file`.
CONFIG_KEYS = (
    "alpha",
    "beta",
    "l_bar",
    "h_bar",
    "informal_share",
    "eta",
    "mu",
    "delta",
    "phi",
    "psi",
    "tau",
    "nu",
    "rho",
    "delta_penalty",
)

REPORT_CSV_HEADER = ("scenario", "w_i", "w_l", "w_h", "m_i", "m_l", "m_h")


class ParameterError(ValueError):
    """A parameter set violates its domain restrictions."""


@dataclass(frozen=True)
class EconomyParams:
    """Technology and endowments of the regional economy.

    Parameters
    ----------
    alpha : float
        Output elasticity of high-skill labor; strictly positive.
    beta : float
        Output elasticity of formal low-skill labor; strictly positive,
        with ``alpha + beta < 1`` so the informal elasticity
        ``1 - alpha - beta`` stays positive.
    l_bar : float
        Total lower-tier labor endowment, split between the formal and
        informal sectors.
    h_bar : float
        High-skill endowment.
    informal_share : float
        Share of ``l_bar`` employed informally, in (0, 1). Regional
        informality in the study area runs near 0.45, the default.
    """

    alpha: float
    beta: float
    l_bar: float = 1.0
    h_bar: float = 1.0
    informal_share: float = 0.45

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not (self.beta > 0.0):
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not (self.alpha + self.beta < 1.0):
            raise ParameterError(
                f"alpha + beta must be below one, got {self.alpha + self.beta}"
            )
        if not (self.l_bar > 0.0 and self.h_bar > 0.0):
            raise ParameterError("endowments l_bar and h_bar must be positive")
        if not (0.0 < self.informal_share < 1.0):
            raise ParameterError(
                f"informal_share must lie in (0, 1), got {self.informal_share}"
            )


@dataclass(frozen=True)
class ImmigrationShock:
    """Proportional labor inflow into the two lower tiers.

    ``eta`` expands formal low-skill labor to ``(1 + eta) L`` and ``mu``
    expands informal labor to ``(1 + mu) I``. ``delta`` is the implied
    aggregate expansion of the lower-tier endowment; it may be omitted,
    in which case it is derived from the other two wherever an
    :class:`EconomyParams` supplies the informal share. When all three
    are given they must satisfy
    ``(1 + delta) = (1 + eta)(1 - s) + (1 + mu) s`` within 1e-12.
    """

    eta: float
    mu: float
    delta: float | None = None

    def __post_init__(self):
        if self.eta < 0.0 or self.mu < 0.0:
            raise ParameterError("eta and mu must be nonnegative")
        if self.delta is not None and not (0.0 <= self.delta < 1.0):
            raise ParameterError(f"delta must lie in [0, 1), got {self.delta}")

    def resolve_delta(self, informal_share: float) -> float:
        """Return delta, checking consistency if it was supplied."""
        implied = implied_delta(self.eta, self.mu, informal_share)
        if self.delta is not None:
            if abs(self.delta - implied) > DELTA_CONSISTENCY_TOL * max(1.0, abs(implied)):
                raise ParameterError(
                    f"delta={self.delta} is inconsistent with eta={self.eta}, "
                    f"mu={self.mu} at informal share {informal_share} "
                    f"(implied {implied!r})"
                )
            return self.delta
        return implied


@dataclass(frozen=True)
class EquilibriumState:
    """Baseline competitive equilibrium of the regional economy."""

    output: float
    labor_informal: float
    labor_formal_low: float
    labor_high: float
    wage_informal: float
    wage_formal_low: float
    wage_high: float

    def foc_residuals(self, params: EconomyParams) -> tuple[float, float, float]:
        """Marginal-product-minus-wage residuals; zero at equilibrium."""
        gamma = 1.0 - params.alpha - params.beta
        y = self.output
        return (
            gamma * y / self.labor_informal - self.wage_informal,
            params.beta * y / self.labor_formal_low - self.wage_formal_low,
            params.alpha * y / self.labor_high - self.wage_high,
        )


def implied_delta(eta: float, mu: float, informal_share: float) -> float:
    """Aggregate lower-tier expansion implied by the two sector inflows.

    ``(1 + delta) L_bar = (1 + eta) L + (1 + mu) I`` with ``L`` formal
    and ``I`` informal, so ``delta`` is the share-weighted mean of the
    sector growth rates.
    """
    if eta < 0.0 or mu < 0.0:
        raise ParameterError("eta and mu must be nonnegative")
    if not (0.0 < informal_share < 1.0):
        raise ParameterError(f"informal_share must lie in (0, 1), got {informal_share}")
    return eta * (1.0 - informal_share) + mu * informal_share


def solve_baseline(params: EconomyParams, wage_normalization: float = 1.0) -> EquilibriumState:
    """Solve the baseline equilibrium at the given endowments.

    The first-order conditions fix only relative wages, so the caller
    supplies a normalization that scales the output price level; the
    default of one reports output at its raw production-function value.
    """
    if not (wage_normalization > 0.0):
        raise ParameterError(f"wage_normalization must be positive, got {wage_normalization}")
    gamma = 1.0 - params.alpha - params.beta
    labor_informal = params.informal_share * params.l_bar
    labor_formal_low = (1.0 - params.informal_share) * params.l_bar
    labor_high = params.h_bar
    output = (
        wage_normalization
        * labor_high**params.alpha
        * labor_formal_low**params.beta
        * labor_informal**gamma
    )
    return EquilibriumState(
        output=output,
        labor_informal=labor_informal,
        labor_formal_low=labor_formal_low,
        labor_high=labor_high,
        wage_informal=gamma * output / labor_informal,
        wage_formal_low=params.beta * output / labor_formal_low,
        wage_high=params.alpha * output / labor_high,
    )


def shock_multipliers(
    params: EconomyParams, shock: ImmigrationShock
) -> tuple[float, float, float]:
    """Wage multipliers ``(m_i, m_l, m_h)`` after the labor inflow.

    With informal labor scaled by ``(1 + mu)`` and formal low-skill
    labor by ``(1 + eta)``::

        m_i = (1 + eta)^beta / (1 + mu)^(alpha + beta)
        m_l = (1 + mu)^(1 - alpha - beta) / (1 + eta)^(1 - beta)
        m_h = (1 + eta)^beta * (1 + mu)^(1 - alpha - beta)

    The high-skill wage always rises under a positive inflow; the
    informal wage falls whenever ``mu > eta`` even though more labor is
    absorbed informally, a sign pattern the comparative-statics report
    calls out explicitly.
    """
    shock.resolve_delta(params.informal_share)  # enforces consistency when delta given
    alpha, beta = params.alpha, params.beta
    gamma = 1.0 - alpha - beta
    ge = 1.0 + shock.eta
    gm = 1.0 + shock.mu
    m_i = ge**beta / gm ** (alpha + beta)
    m_l = gm**gamma / ge ** (1.0 - beta)
    m_h = ge**beta * gm**gamma
    return m_i, m_l, m_h


def shocked_equilibrium(
    params: EconomyParams, shock: ImmigrationShock, wage_normalization: float = 1.0
) -> EquilibriumState:
    """Post-inflow equilibrium solved directly from the first-order conditions.

    This recomputes wages at the expanded labor quantities rather than
    applying :func:`shock_multipliers`; the two routes agree to rounding
    and the tests hold them to 1e-12 relative.
    """
    base = solve_baseline(params, wage_normalization)
    gamma = 1.0 - params.alpha - params.beta
    labor_informal = (1.0 + shock.mu) * base.labor_informal
    labor_formal_low = (1.0 + shock.eta) * base.labor_formal_low
    labor_high = base.labor_high
    output = (
        wage_normalization
        * labor_high**params.alpha
        * labor_formal_low**params.beta
        * labor_informal**gamma
    )
    return EquilibriumState(
        output=output,
        labor_informal=labor_informal,
        labor_formal_low=labor_formal_low,
        labor_high=labor_high,
        wage_informal=gamma * output / labor_informal,
        wage_formal_low=params.beta * output / labor_formal_low,
        wage_high=params.alpha * output / labor_high,
    )


@dataclass(frozen=True)
class BorderTownParams:
    """Primitives of the border-town economy.

    Parameters
    ----------
    phi : float
        Formal-sector productivity scale (output ``phi * log(labor)``).
    psi : float
        Informal-sector productivity scale.
    tau : float
        Payroll tax rate charged to the formal firm; nonnegative.
    nu : float
        Native disutility parameter; natives supply ``nu`` units of
        labor inelastically, ``0 < nu < 1``.
    rho : float
        Refugee labor-supply preference, ``0 < rho < 1``.
    delta_penalty : float
        Productivity discount on refugee labor, in (0, 1). Distinct from
        the aggregate-expansion ``delta`` of :class:`ImmigrationShock`.
    """

    phi: float
    psi: float
    tau: float
    nu: float
    rho: float
    delta_penalty: float

    def __post_init__(self):
        if not (self.phi > 0.0 and self.psi > 0.0):
            raise ParameterError("phi and psi must be positive")
        if self.tau < 0.0:
            raise ParameterError(f"tau must be nonnegative, got {self.tau}")
        if not (0.0 < self.nu < 1.0):
            raise ParameterError(f"nu must lie in (0, 1), got {self.nu}")
        if not (0.0 < self.rho < 1.0):
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if not (0.0 < self.delta_penalty < 1.0):
            raise ParameterError(
                f"delta_penalty must lie in (0, 1), got {self.delta_penalty}"
            )


@dataclass(frozen=True)
class BorderTownEquilibrium:
    """Market-clearing outcome of the border-town economy.

    ``transfer`` follows the government budget rule ``w * tau``. The
    goods market is not a free equation once labor clearing and the
    budget rule hold, so its residual is exposed read-only instead of
    being enforced.
    """

    wage: float
    native_labor: float
    refugee_labor: float
    effective_informal_labor: float
    effective_formal_labor: float
    output_informal: float
    output_formal: float
    native_consumption: float
    refugee_consumption: float
    transfer: float

    @property
    def goods_market_residual(self) -> float:
        """Output minus consumption; reported, never constrained."""
        return (
            self.output_informal
            + self.output_formal
            - self.native_consumption
            - self.refugee_consumption
        )


def border_town_labor_residual(
    params: BorderTownParams, wage: float, with_refugees: bool
) -> float:
    """Labor demand minus supply at a candidate wage (for root finding)."""
    demand = params.psi / wage + params.phi / (wage * (1.0 + params.tau))
    supply = params.nu
    if with_refugees:
        supply += params.delta_penalty * params.rho
    return demand - supply


def solve_border_town(
    params: BorderTownParams, with_refugees: bool = False
) -> BorderTownEquilibrium:
    """Solve the border-town equilibrium in closed form.

    Without refugees the clearing wage is
    ``w1 = phi / (nu (1 + tau)) + psi / nu``; a refugee inflow rescales
    it to ``w2 = nu / (delta_penalty * rho + nu) * w1``. Firm labor
    demands are ``psi / w`` (informal) and ``phi / (w (1 + tau))``
    (formal); household supplies are inelastic at ``nu`` and ``rho``.
    """
    effective_supply = params.nu
    refugee_labor = 0.0
    if with_refugees:
        refugee_labor = params.rho
        effective_supply = params.nu + params.delta_penalty * params.rho
    wage = (params.phi / (1.0 + params.tau) + params.psi) / effective_supply
    informal_labor = params.psi / wage
    formal_labor = params.phi / (wage * (1.0 + params.tau))
    native_consumption = wage * params.nu
    refugee_consumption = params.delta_penalty * wage * params.rho if with_refugees else 0.0
    return BorderTownEquilibrium(
        wage=wage,
        native_labor=params.nu,
        refugee_labor=refugee_labor,
        effective_informal_labor=informal_labor,
        effective_formal_labor=formal_labor,
        output_informal=params.psi * math.log(informal_labor),
        output_formal=params.phi * math.log(formal_labor),
        native_consumption=native_consumption,
        refugee_consumption=refugee_consumption,
        transfer=wage * params.tau,
    )


def solve_border_town_bisection(
    params: BorderTownParams,
    with_refugees: bool = False,
    lo: float = 1e-8,
    hi: float = 1e8,
    tol: float = 1e-12,
) -> float:
    """Clearing wage via bisection on the labor-market residual.

    Independent route used to cross-check :func:`solve_border_town`;
    the residual is strictly decreasing in the wage so the root is
    unique on any bracket that straddles it.
    """
    return bisect_root(
        lambda w: border_town_labor_residual(params, w, with_refugees), lo, hi, tol=tol
    )


@dataclass(frozen=True)
class ComparativeStaticsReport:
    """Baseline-versus-shock wage comparison.

    ``signs`` maps each wage tier to -1, 0 or +1 according to the
    direction of the wage change; ``notes`` carries human-readable flags
    for sign patterns worth surfacing (for example the informal wage
    dropping below baseline even when the informal inflow dominates).
    """

    baseline: EquilibriumState
    shocked: EquilibriumState
    multipliers: tuple[float, float, float]
    mu_exceeds_eta: bool
    signs: Mapping[str, int]
    notes: tuple[str, ...]

    def rows(self) -> list[dict[str, float | str]]:
        """Rows for the delimited report (header ``scenario,w_i,w_l,w_h,m_i,m_l,m_h``)."""
        m_i, m_l, m_h = self.multipliers
        return [
            {
                "scenario": "baseline",
                "w_i": self.baseline.wage_informal,
                "w_l": self.baseline.wage_formal_low,
                "w_h": self.baseline.wage_high,
                "m_i": 1.0,
                "m_l": 1.0,
                "m_h": 1.0,
            },
            {
                "scenario": "shocked",
                "w_i": self.shocked.wage_informal,
                "w_l": self.shocked.wage_formal_low,
                "w_h": self.shocked.wage_high,
                "m_i": m_i,
                "m_l": m_l,
                "m_h": m_h,
            },
        ]


def _sign(x: float, tol: float = 1e-15) -> int:
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def comparative_statics_report(
    params: EconomyParams, shock: ImmigrationShock, wage_normalization: float = 1.0
) -> ComparativeStaticsReport:
    """Compare baseline and post-inflow wages tier by tier."""
    baseline = solve_baseline(params, wage_normalization)
    shocked = shocked_equilibrium(params, shock, wage_normalization)
    m_i, m_l, m_h = shock_multipliers(params, shock)
    mu_exceeds_eta = shock.mu > shock.eta
    signs = {
        "informal": _sign(m_i - 1.0),
        "formal_low": _sign(m_l - 1.0),
        "high": _sign(m_h - 1.0),
    }
    notes: list[str] = []
    if mu_exceeds_eta and m_i < 1.0:
        notes.append(
            "informal wage multiplier is below one although the informal inflow "
            "dominates (mu > eta); the informal tier absorbs more labor and its "
            "marginal product falls"
        )
    if m_h > 1.0 and (shock.eta > 0.0 or shock.mu > 0.0):
        notes.append("high-skill wage rises: complementary to both expanded tiers")
    return ComparativeStaticsReport(
        baseline=baseline,
        shocked=shocked,
        multipliers=(m_i, m_l, m_h),
        mu_exceeds_eta=mu_exceeds_eta,
        signs=signs,
        notes=tuple(notes),
    )


def write_report_csv(report: ComparativeStaticsReport, path) -> None:
    """Write the comparative-statics table with the canonical header.

    Decimal points only, no thousands separators.
    """
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_CSV_HEADER)
        for row in report.rows():
            writer.writerow(
                [row["scenario"]] + [repr(float(row[k])) for k in REPORT_CSV_HEADER[1:]]
            )


def read_params_file(path) -> dict[str, float]:
    """Read a flat key-value parameter file.

    Lines look like ``alpha = 0.3``; ``#`` starts a comment and section
    headers in square brackets are tolerated and ignored, so the same
    file can double as a section of a run configuration. Unknown keys
    raise, since a typo silently falling back to a default would poison
    every downstream number.
    """
    values: dict[str, float] = {}
    with open(path) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ParameterError(f"{path}:{lineno}: unknown parameter {key!r}")
            if key in values:
                raise ParameterError(f"{path}:{lineno}: duplicate parameter {key!r}")
            try:
                values[key] = float(value.strip())
            except ValueError as exc:
                raise ParameterError(
                    f"{path}:{lineno}: could not parse value for {key!r}: {value.strip()!r}"
                ) from exc
    return values


def economy_params_from_mapping(values: Mapping[str, float]) -> EconomyParams:
    """Build :class:`EconomyParams` from a key-value mapping (extra keys ignored)."""
    kwargs = {}
    for key in ("alpha", "beta", "l_bar", "h_bar", "informal_share"):
        if key in values:
            kwargs[key] = float(values[key])
    if "alpha" not in kwargs or "beta" not in kwargs:
        raise ParameterError("economy parameters require at least alpha and beta")
    return EconomyParams(**kwargs)


def shock_from_mapping(values: Mapping[str, float]) -> ImmigrationShock:
    """Build :class:`ImmigrationShock` from a key-value mapping."""
    if "eta" not in values or "mu" not in values:
        raise ParameterError("shock parameters require eta and mu")
    delta = values.get("delta")
    return ImmigrationShock(
        eta=float(values["eta"]),
        mu=float(values["mu"]),
        delta=None if delta is None else float(delta),
    )


def border_town_params_from_mapping(values: Mapping[str, float]) -> BorderTownParams:
    """Build :class:`BorderTownParams` from a key-value mapping."""
    required = ("phi", "psi", "tau", "nu", "rho", "delta_penalty")
    missing = [key for key in required if key not in values]
    if missing:
        raise ParameterError(f"border town parameters missing {missing}")
    return BorderTownParams(**{key: float(values[key]) for key in required})
