"""Population benchmarks, scoring, and per-approach scoreboards."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence


from .dataset import STATE_REGION, FilterSpec, SurveyDataset
from .errors import (
    ConfigError,
    EstimationError,
    InsufficientCells,
    MissingYear,
    NoConvergenceWarning,
    RakingError,
    UnitMismatch,
    UnknownBenchmark,
)
from .estimators import ESTIMATORS, EstimateWithCI, estimate
from .raking import MarginSpec, MarginTargets, RakeConfig, assign_cells, rake

UNITS = ("percent", "count")


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    truth: float
    units: str
    estimator: str
    params: Mapping[str, Any] = field(default_factory=dict)
    scope: str = "national"

    def __post_init__(self):
        if not math.isfinite(self.truth):
            raise ValueError(f"benchmark {self.name!r}: truth must be finite")
        if self.units not in UNITS:
            raise ValueError(f"benchmark {self.name!r}: unknown units {self.units!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"benchmark {self.name!r}: unknown estimator {self.estimator!r}")
        if self.scope != "national" and self.scope not in STATE_REGION:
            raise ValueError(f"benchmark {self.name!r}: bad scope {self.scope!r}")

    @classmethod
    def from_mapping(cls, name: str, cfg: Mapping[str, Any],
                     base: "BenchmarkSpec | None" = None) -> "BenchmarkSpec":
        if base is not None:
            params = dict(base.params)
            params.update(cfg.get("params") or {})
            fields = {"truth": base.truth, "units": base.units,
                      "estimator": base.estimator, "scope": base.scope}
        else:
            params = dict(cfg.get("params") or {})
            fields = {"scope": "national"}
        fields.update({k: cfg[k] for k in ("truth", "units", "estimator", "scope") if k in cfg})
        missing = {"truth", "units", "estimator"} - set(fields)
        if missing:
            raise ConfigError(f"benchmark {name!r} lacks {sorted(missing)}")
        try:
            return cls(name, float(fields["truth"]), fields["units"], fields["estimator"],
                       params, fields["scope"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def builtin_benchmarks() -> list[BenchmarkSpec]:
    """Default truths for the 2022 midterm, CDC births and ACS internet items.

    Births benchmarks need ``eligible_population_count`` supplied through an
    overlay before they can be estimated.
    """
    births = {"eligible_population_count": None}
    return [
        BenchmarkSpec("house_vote_2022", 51.4, "percent", "two_party_share"),
        BenchmarkSpec("house_vote_2022_likely", 51.4, "percent", "two_party_share",
                      {"likely_voters_only": True}),
        BenchmarkSpec("births_national", 42_091_245, "count", "births_total", births),
        BenchmarkSpec("births_CA", 5_121_438, "count", "births_total", births, "CA"),
        BenchmarkSpec("births_FL", 2_401_935, "count", "births_total", births, "FL"),
        BenchmarkSpec("births_WI", 710_933, "count", "births_total", births, "WI"),
        BenchmarkSpec("internet_paid", 92.3, "percent", "internet_paid"),
        BenchmarkSpec("internet_unpaid", 2.05, "percent", "internet_unpaid"),
    ]


class BenchmarkRegistry:
    """Name -> BenchmarkSpec lookup, optionally overlaid from config."""

    def __init__(self, specs: Iterable[BenchmarkSpec] | None = None):
        specs = builtin_benchmarks() if specs is None else specs
        self._specs = {s.name: s for s in specs}

    def __contains__(self, name):
        return name in self._specs

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self):
        return len(self._specs)

    @property
    def names(self) -> list[str]:
        return list(self._specs)

    def lookup(self, name: str) -> BenchmarkSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownBenchmark(name) from None

    def overlay(self, overlay: Mapping[str, Mapping[str, Any]]) -> "BenchmarkRegistry":
        specs = dict(self._specs)
        for name, cfg in (overlay or {}).items():
            specs[name] = BenchmarkSpec.from_mapping(name, cfg or {}, specs.get(name))
        return BenchmarkRegistry(specs.values())


def lookup(name: str, registry: BenchmarkRegistry | None = None) -> BenchmarkSpec:
    return (registry or BenchmarkRegistry()).lookup(name)


CDC_YEARS = tuple(range(2012, 2022))
PROXY_YEARS = (2019, 2020, 2021)


def cdc_2022_adjustment(births_by_year: Mapping[int, float]) -> float:
    """Births total for 2012 through 2022 when 2022 is not yet published.

    The 2022 count is taken as the mean of 2019-2021.  Births to mothers
    who could not be in the survey population must already be removed.
    """
    years = {int(y): float(v) for y, v in births_by_year.items()}
    missing = set(CDC_YEARS) - set(years)
    if missing:
        raise MissingYear(missing)
    extra = set(years) - set(CDC_YEARS)
    if extra:
        raise ValueError(f"unexpected year(s) {sorted(extra)}; expected 2012-2021 only")
    observed = sum(years[y] for y in CDC_YEARS)
    return observed + sum(years[y] for y in PROXY_YEARS) / len(PROXY_YEARS)


@dataclass(frozen=True)
class BenchmarkScore:
    estimate: EstimateWithCI
    truth: float
    signed_error: float
    abs_error: float
    covered: bool


def score(est: EstimateWithCI, spec: BenchmarkSpec) -> BenchmarkScore:
    """Compare an estimate to its benchmark; percent errors are in points."""
    if spec.units == "percent" and est.units == "proportion":
        est = est.scaled(100.0, "percent")
    if est.units != spec.units:
        raise UnitMismatch(f"estimate in {est.units}, benchmark {spec.name!r} in {spec.units}")
    signed = est.point - spec.truth
    return BenchmarkScore(est, spec.truth, signed, abs(signed),
                          bool(est.ci_low <= spec.truth <= est.ci_high))


def evaluate(spec: BenchmarkSpec, dataset: SurveyDataset, weights=None) -> EstimateWithCI:
    params = dict(spec.params)
    if spec.estimator == "births_total" and not params.get("eligible_population_count"):
        raise ConfigError(
            f"benchmark {spec.name!r} needs params.eligible_population_count "
            "(census count of eligible women)"
        )
    return estimate(spec.estimator, dataset, weights, **params)


# -- scoreboard ---------------------------------------------------------------


@dataclass(frozen=True)
class Approach:
    name: str
    filter: FilterSpec

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any]) -> "Approach":
        return cls(str(cfg["name"]), FilterSpec.from_mapping(cfg.get("filter")))


def default_grouping() -> list[Approach]:
    """All, All Probability, All Nonprobability, then the nine frames."""
    w = FilterSpec.where
    return [
        Approach("All", w(category=["probability", "nonprobability"])),
        Approach("All Probability", w(category="probability")),
        Approach("All Nonprobability", w(category="nonprobability")),
        Approach("Probability panel", w(source_label="prob_panel")),
        Approach("Random ABS", w(source_label=["random_abs", "random_abs_wi"])),
        Approach("RDD", w(source_label="rdd")),
        Approach("Nonprobability panel 1", w(source_label="nonprob_panel_1")),
        Approach("Nonprobability panel 2", w(source_label="nonprob_panel_2")),
        Approach("Nonprobability marketplace 1", w(source_label="nonprob_marketplace_1")),
        Approach("Nonprobability marketplace 2", w(source_label="nonprob_marketplace_2")),
        Approach("Registered voters ABS", w(source_label="rv_abs")),
        Approach("Registered voters SMS", w(source_label="rv_sms")),
    ]


def state_grouping() -> list[Approach]:
    """State-level rows; the small ABS and RDD samples are combined."""
    w = FilterSpec.where
    return [
        Approach("All", w(category=["probability", "nonprobability"])),
        Approach("All Probability", w(category="probability")),
        Approach("All Nonprobability", w(category="nonprobability")),
        Approach("Probability panel", w(source_label="prob_panel")),
        Approach("Random ABS + RDD", w(source_label=["random_abs", "random_abs_wi", "rdd"])),
        Approach("Nonprobability panel 1", w(source_label="nonprob_panel_1")),
        Approach("Nonprobability panel 2", w(source_label="nonprob_panel_2")),
        Approach("Nonprobability marketplace 1", w(source_label="nonprob_marketplace_1")),
        Approach("Nonprobability marketplace 2", w(source_label="nonprob_marketplace_2")),
    ]


@dataclass(frozen=True)
class ScoreboardRow:
    benchmark: str
    approach: str
    weighted: bool
    status: str
    n: int
    score: BenchmarkScore | None = None
    message: str = ""

    COLUMNS = ("benchmark", "approach", "weighted", "point", "ci_low", "ci_high",
               "truth", "abs_error", "covered", "n", "effective_n", "status")

    def as_dict(self) -> dict[str, Any]:
        s = self.score
        e = s.estimate if s else None
        return {
            "benchmark": self.benchmark,
            "approach": self.approach,
            "weighted": self.weighted,
            "point": e.point if e else None,
            "ci_low": e.ci_low if e else None,
            "ci_high": e.ci_high if e else None,
            "truth": s.truth if s else None,
            "abs_error": s.abs_error if s else None,
            "covered": s.covered if s else None,
            "n": self.n,
            "effective_n": e.effective_n if e else None,
            "status": self.status,
        }


def scoreboard(dataset: SurveyDataset, margin_spec: MarginSpec, targets: MarginTargets,
               benchmarks: Sequence[BenchmarkSpec],
               grouping: Sequence[Approach] | None = None,
               rake_config: RakeConfig | None = None) -> list[ScoreboardRow]:
    """Unweighted and weighted scores of every approach against every benchmark.

    Each approach is raked separately.  Failures (sparse cells, empty
    denominators...) are recorded in the row's ``status`` and never abort
    the table, which always has ``2 * len(grouping)`` rows per benchmark.
    State-scoped benchmarks restrict ``dataset`` to their state; all
    benchmarks in one call must share a scope.
    """
    grouping = list(grouping) if grouping is not None else default_grouping()
    scopes = {b.scope for b in benchmarks}
    if len(scopes) > 1:
        raise ValueError(f"benchmarks mix scopes {sorted(scopes)}; score one scope per call")
    scope = scopes.pop() if scopes else "national"
    if scope != "national":
        dataset = dataset.filter(FilterSpec.where(state=scope))

    rows: list[ScoreboardRow] = []
    per_approach = []
    for appr in grouping:
        sub = dataset.filter(appr.filter)
        weights, status, message = None, "ok", ""
        if len(sub) == 0:
            status, message = "EmptyApproach", "no records match this approach"
        else:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", NoConvergenceWarning)
                    weights = rake(assign_cells(sub, margin_spec), targets, rake_config,
                                   spec=margin_spec)
                if not weights.converged:
                    status = "NoConvergence"
            except InsufficientCells as exc:
                # empty cells are the extreme case; report the family name
                status, message = "InsufficientCells", str(exc)
            except RakingError as exc:
                status, message = type(exc).__name__, str(exc)
        per_approach.append((appr, sub, weights, status, message))

    for bench in benchmarks:
        for appr, sub, weights, rake_status, rake_msg in per_approach:
            for weighted in (False, True):
                if len(sub) == 0:
                    rows.append(ScoreboardRow(bench.name, appr.name, weighted,
                                              rake_status, 0, None, rake_msg))
                    continue
                if weighted and weights is None:
                    rows.append(ScoreboardRow(bench.name, appr.name, True,
                                              rake_status, len(sub), None, rake_msg))
                    continue
                try:
                    est = evaluate(bench, sub, weights if weighted else None)
                    sc = score(est, bench)
                    st = rake_status if weighted else "ok"
                    rows.append(ScoreboardRow(bench.name, appr.name, weighted, st,
                                              len(sub), sc))
                except (EstimationError, UnitMismatch) as exc:
                    rows.append(ScoreboardRow(bench.name, appr.name, weighted,
                                              type(exc).__name__, len(sub), None, str(exc)))
    return rows
