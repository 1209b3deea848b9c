"""Benchmark estimators: two-party vote share, births total, internet access.

All estimators are ratio estimators over the records that pass their own
outcome filter, so weights only matter up to scale.  Intervals use the
normal approximation with the Kish effective sample size of the weights
actually used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from ._validation import check_weights
from .dataset import CATEGORIES, MISSING, FilterSpec, SurveyDataset, birth_eligible_mask
from .errors import EmptyDenominator, NoEligibleRespondents
from .raking import kish_effective_n

Z95 = 1.96
CI_METHOD = "normal approximation, Kish effective n"
TOP_CODE_NOTE = "births top-coded at 6 are counted as exactly 6"

Predicate = Union[FilterSpec, Callable[[SurveyDataset], np.ndarray], np.ndarray, None]


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    ci_low: float
    ci_high: float
    n_used: int
    effective_n: float
    weighted: bool
    units: str = "proportion"  # proportion | percent | count
    method: str = CI_METHOD
    notes: tuple[str, ...] = field(default=(), compare=False)

    def scaled(self, factor: float, units: str) -> "EstimateWithCI":
        return EstimateWithCI(self.point * factor, self.ci_low * factor,
                              self.ci_high * factor, self.n_used, self.effective_n,
                              self.weighted, units, self.method, self.notes)

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


def _mask(ds: SurveyDataset, pred: Predicate) -> np.ndarray:
    if pred is None:
        return np.ones(len(ds), dtype=bool)
    if isinstance(pred, FilterSpec):
        return pred.mask(ds)
    if callable(pred):
        return np.asarray(pred(ds), dtype=bool)
    m = np.asarray(pred, dtype=bool)
    if m.shape != (len(ds),):
        raise ValueError("boolean mask does not match dataset length")
    return m


def _weights(ds: SurveyDataset, weights) -> tuple[np.ndarray, bool]:
    if weights is None:
        return np.ones(len(ds)), False
    return check_weights(weights, len(ds)), True


def weighted_proportion(dataset: SurveyDataset, weights, indicator: Predicate,
                        denominator: Predicate = None) -> EstimateWithCI:
    """Weighted share of ``denominator`` records for which ``indicator`` holds.

    ``weights=None`` gives the unweighted estimate.
    """
    w, weighted = _weights(dataset, weights)
    den = _mask(dataset, denominator)
    num = _mask(dataset, indicator) & den
    wd = w[den]
    total = wd.sum()
    if den.sum() == 0 or total <= 0:
        raise EmptyDenominator("no records (with positive weight) in the denominator")
    p = float(w[num].sum() / total)
    p = min(max(p, 0.0), 1.0)
    n_eff = kish_effective_n(wd)
    half = Z95 * math.sqrt(p * (1 - p) / n_eff)
    return EstimateWithCI(p, max(0.0, p - half), min(1.0, p + half),
                          int(den.sum()), n_eff, weighted)


def _code_mask(field_name, values):
    cats = CATEGORIES[field_name]
    idx = [cats.index(v) for v in values]

    def pred(ds):
        return np.isin(ds.codes(field_name), idx)

    return pred


def _and(a: Predicate, b: Predicate):
    if a is None:
        return b
    if b is None:
        return a
    return lambda ds: _mask(ds, a) & _mask(ds, b)


def two_party_share(dataset: SurveyDataset, weights=None,
                    subset: Predicate = None) -> EstimateWithCI:
    """Percent Republican among Republican plus Democratic house votes."""
    try:
        est = weighted_proportion(
            dataset, weights, _code_mask("vote_house", ["rep"]),
            _and(_code_mask("vote_house", ["rep", "dem"]), subset),
        )
    except EmptyDenominator:
        raise EmptyDenominator("no two-party (rep/dem) house vote responses") from None
    return est.scaled(100.0, "percent")


@dataclass(frozen=True)
class LikelyVoterRule:
    """Turnout screen: already voted or certain passes; probably needs interest.

    Records missing either item are excluded.
    """

    unconditional: frozenset = frozenset({"already_voted", "certain"})
    conditional: frozenset = frozenset({"probably"})
    interest_accept: frozenset = frozenset({"extremely", "very"})

    def accepts(self, turnout_intent: str, interest: str) -> bool:
        if turnout_intent == MISSING or interest == MISSING:
            return False
        if turnout_intent in self.unconditional:
            return True
        return turnout_intent in self.conditional and interest in self.interest_accept

    def __call__(self, ds: SurveyDataset) -> np.ndarray:
        t_cats, i_cats = CATEGORIES["turnout_intent"], CATEGORIES["interest"]
        t, i = ds.codes("turnout_intent"), ds.codes("interest")
        present = (t != t_cats.index(MISSING)) & (i != i_cats.index(MISSING))
        uncond = np.isin(t, [t_cats.index(v) for v in self.unconditional])
        cond = np.isin(t, [t_cats.index(v) for v in self.conditional]) & np.isin(
            i, [i_cats.index(v) for v in self.interest_accept]
        )
        return present & (uncond | cond)


def likely_voters(dataset: SurveyDataset | None = None,
                  rule: LikelyVoterRule | None = None) -> FilterSpec:
    """FilterSpec selecting likely voters.  ``dataset`` is accepted for symmetry."""
    return FilterSpec(predicates=(rule or LikelyVoterRule(),))


def births_total(dataset: SurveyDataset, weights, eligible_population_count: float,
                 subset: Predicate = None) -> EstimateWithCI:
    """Population births total: weighted mean births per eligible woman x count.

    Eligible respondents are women aged 65 or younger with a non-missing
    births answer.
    """
    if not eligible_population_count or eligible_population_count <= 0:
        raise ValueError("eligible_population_count must be positive")
    w, weighted = _weights(dataset, weights)
    births, observed = dataset.births()
    elig = birth_eligible_mask(dataset) & observed & _mask(dataset, subset)
    wd = w[elig]
    if elig.sum() == 0 or wd.sum() <= 0:
        raise NoEligibleRespondents("no eligible women with a births response")
    y = births[elig].astype(float)
    mean = float(np.dot(wd, y) / wd.sum())
    var = float(np.dot(wd, (y - mean) ** 2) / wd.sum())
    n_eff = kish_effective_n(wd)
    half = Z95 * math.sqrt(var / n_eff)
    count = float(eligible_population_count)
    return EstimateWithCI(mean * count, max(0.0, mean - half) * count,
                          (mean + half) * count, int(elig.sum()), n_eff, weighted,
                          units="count", notes=(TOP_CODE_NOTE,))


INTERNET_LEVELS = ("paid", "unpaid", "none")


def internet_shares(dataset: SurveyDataset, weights=None,
                    subset: Predicate = None) -> dict[str, EstimateWithCI]:
    """Shares of paid, unpaid and no home internet among non-missing answers."""
    den = _and(_code_mask("internet", INTERNET_LEVELS), subset)
    try:
        return {
            level: weighted_proportion(dataset, weights,
                                       _code_mask("internet", [level]), den)
            for level in INTERNET_LEVELS
        }
    except EmptyDenominator:
        raise EmptyDenominator("no non-missing internet access responses") from None


def _internet(level):
    def est(dataset, weights=None, subset=None):
        return internet_shares(dataset, weights, subset)[level].scaled(100.0, "percent")

    est.__name__ = f"internet_{level}"
    return est


ESTIMATORS: dict[str, Callable[..., EstimateWithCI]] = {
    "two_party_share": two_party_share,
    "births_total": births_total,
    "internet_paid": _internet("paid"),
    "internet_unpaid": _internet("unpaid"),
    "internet_none": _internet("none"),
}


def estimate(name: str, dataset: SurveyDataset, weights=None, *,
             likely_voters_only: bool = False, **params) -> EstimateWithCI:
    """Run registered estimator ``name``; ``params`` are passed through."""
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise KeyError(f"unknown estimator {name!r}") from None
    subset = LikelyVoterRule() if likely_voters_only else None
    return fn(dataset, weights, subset=subset, **params)
