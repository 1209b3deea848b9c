import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset, make_record
from oracles import brute_proportion
from surveybench.dataset import FilterSpec
from surveybench.errors import EmptyDenominator, NoEligibleRespondents
from surveybench.estimators import (
    Z95,
    LikelyVoterRule,
    births_total,
    estimate,
    internet_shares,
    likely_voters,
    two_party_share,
    weighted_proportion,
)


def votes(rep, dem, other=0, **kw):
    labels = ["rep"] * rep + ["dem"] * dem + ["other"] * other
    return make_dataset([make_record(f"v{i}", vote_house=v, **kw)
                         for i, v in enumerate(labels)])


def women_births(values):
    return make_dataset([make_record(f"w{i}", gender="woman", age_years=35, births_10yr=b)
                         for i, b in enumerate(values)])


def internet(paid, unpaid, none, missing=0):
    labels = ["paid"] * paid + ["unpaid"] * unpaid + ["none"] * none + ["missing"] * missing
    return make_dataset([make_record(f"i{i}", internet=v) for i, v in enumerate(labels)])


def is_rep(ds):
    return ds.column("vote_house") == "rep"


def test_weighted_proportion_hand_ci():
    ds = votes(400, 600)
    est = weighted_proportion(ds, None, is_rep)
    assert est.point == pytest.approx(0.4)
    assert est.half_width == pytest.approx(1.96 * math.sqrt(0.4 * 0.6 / 1000), abs=1e-12)
    assert est.half_width == pytest.approx(0.0304, abs=5e-5)
    assert est.effective_n == 1000 and not est.weighted


def test_all_true_gives_degenerate_ci():
    est = weighted_proportion(votes(20, 0), np.ones(20), is_rep)
    assert (est.point, est.ci_low, est.ci_high) == (1.0, 1.0, 1.0)


def test_uniform_scale_invariance():
    ds = votes(13, 29)
    w = np.random.default_rng(1).uniform(0.2, 3, len(ds))
    a = weighted_proportion(ds, w, is_rep)
    b = weighted_proportion(ds, 2 * w, is_rep)
    assert (a.point, a.ci_low, a.ci_high) == pytest.approx((b.point, b.ci_low, b.ci_high))


def test_empty_denominator():
    ds = votes(3, 3)
    with pytest.raises(EmptyDenominator):
        weighted_proportion(ds, None, is_rep, lambda d: np.zeros(len(d), bool))
    with pytest.raises(EmptyDenominator):
        two_party_share(votes(0, 0, other=4))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.booleans(), st.booleans()),
                min_size=1, max_size=40))
def test_weighted_proportion_oracle(rows):
    w = [r[0] for r in rows]
    ind = np.array([r[1] for r in rows])
    den = np.array([r[2] for r in rows])
    ds = votes(len(rows), 0)
    if not den.any():
        with pytest.raises(EmptyDenominator):
            weighted_proportion(ds, w, ind, den)
        return
    est = weighted_proportion(ds, w, ind, den)
    assert est.point == pytest.approx(brute_proportion(w, ind, den), abs=1e-12)


@settings(max_examples=30)
@given(p=st.integers(1, 99), n=st.integers(20, 300))
def test_ci_shrinks_with_n(p, n):
    k = round(p * n / 100)
    if k in (0, n):
        return
    small = weighted_proportion(votes(k, n - k), None, is_rep)
    big = weighted_proportion(votes(4 * k, 4 * (n - k)), None, is_rep)
    assert big.half_width < small.half_width


# -- two-party share ----------------------------------------------------------


def test_two_party_sixty_forty_twenty():
    est = two_party_share(votes(60, 40, other=20))
    assert est.point == 60.0
    assert est.units == "percent"
    assert est.n_used == 100


def test_two_party_all_rep():
    assert two_party_share(votes(9, 0)).point == 100.0


@settings(max_examples=40, deadline=None)
@given(rep=st.integers(0, 30), dem=st.integers(0, 30), extra=st.lists(
    st.sampled_from(["other", "none", "missing"]), max_size=15))
def test_two_party_ignores_non_two_party(rep, dem, extra):
    if rep + dem == 0:
        return
    base = votes(rep, dem)
    recs = list(base) + [make_record(f"x{i}", vote_house=v) for i, v in enumerate(extra)]
    more = make_dataset(recs)
    w_more = np.r_[np.ones(rep + dem), np.full(len(extra), 7.0)]
    assert two_party_share(more, w_more).point == pytest.approx(two_party_share(base).point)


@settings(max_examples=40, deadline=None)
@given(rep=st.integers(1, 30), dem=st.integers(1, 30), c=st.floats(0.1, 5))
def test_uniform_weights_equal_unweighted(rep, dem, c):
    ds = votes(rep, dem)
    a = two_party_share(ds)
    b = two_party_share(ds, np.full(len(ds), c))
    assert a.point == pytest.approx(b.point)
    assert a.ci_low == pytest.approx(b.ci_low)
    wb = women_births([i % 3 for i in range(rep + dem)])
    assert births_total(wb, None, 1e6).point == pytest.approx(
        births_total(wb, np.full(len(wb), c), 1e6).point)


# -- likely voters ------------------------------------------------------------


@pytest.mark.parametrize("turnout,interest,ok", [
    ("already_voted", "not_at_all", True),
    ("certain", "a_little", True),
    ("probably", "somewhat", False),
    ("probably", "very", True),
    ("probably", "extremely", True),
    ("will_not_vote", "extremely", False),
    ("even", "extremely", False),
    ("certain", "missing", False),
    ("missing", "extremely", False),
])
def test_likely_voter_rule(turnout, interest, ok):
    rule = LikelyVoterRule()
    assert rule.accepts(turnout, interest) is ok
    ds = make_dataset([make_record("a", turnout_intent=turnout, interest=interest)])
    assert bool(rule(ds)[0]) is ok
    assert len(ds.filter(likely_voters())) == int(ok)


def test_likely_voter_subset_estimate():
    recs = [make_record("a", vote_house="rep", turnout_intent="certain", interest="very"),
            make_record("b", vote_house="dem", turnout_intent="even", interest="very"),
            make_record("c", vote_house="dem", turnout_intent="already_voted",
                        interest="very"),
            make_record("d", vote_house="dem", turnout_intent="probably", interest="very")]
    ds = make_dataset(recs)
    assert estimate("two_party_share", ds).point == 25.0
    assert estimate("two_party_share", ds, likely_voters_only=True).point == pytest.approx(
        100 / 3)


def test_likely_voter_from_mapping():
    ds = make_dataset([make_record("a", turnout_intent="certain", interest="very"),
                       make_record("b", turnout_intent="even", interest="very")])
    spec = FilterSpec.from_mapping({"likely_voter": True})
    assert ds.filter(spec).respondent_ids.tolist() == ["a"]


# -- births -------------------------------------------------------------------


def test_births_hand_fixture():
    est = births_total(women_births([0, 1, 2, 0, 1]), None, 1_000_000)
    assert est.point == 800_000
    assert est.units == "count"
    assert est.ci_low < est.point < est.ci_high


def test_births_all_zero():
    est = births_total(women_births([0, 0, 0]), None, 5e7)
    assert est.point == 0
    assert est.ci_low == est.ci_high == 0


def test_births_excludes_ineligible_and_missing():
    recs = list(women_births([2, 2]))
    recs += [make_record("m", gender="man"), make_record("old", gender="woman", age_years=70),
             make_record("na", gender="woman", age_years=30)]
    est = births_total(make_dataset(recs), None, 10)
    assert est.point == 20 and est.n_used == 2


def test_births_no_eligible():
    with pytest.raises(NoEligibleRespondents):
        births_total(make_dataset([make_record("m")]), None, 10)
    with pytest.raises(ValueError):
        births_total(women_births([1]), None, 0)


@settings(max_examples=40, deadline=None)
@given(vals=st.lists(st.integers(0, 6), min_size=1, max_size=20),
       count=st.floats(1, 1e8), k=st.floats(0.1, 10))
def test_births_linear_in_count(vals, count, k):
    ds = women_births(vals)
    a = births_total(ds, None, count)
    b = births_total(ds, None, k * count)
    assert b.point == pytest.approx(k * a.point)
    assert b.ci_high == pytest.approx(k * a.ci_high)


# -- internet -----------------------------------------------------------------


def test_internet_hand_fixture():
    sh = internet_shares(internet(90, 5, 5, missing=7))
    assert [sh[k].point for k in ("paid", "unpaid", "none")] == pytest.approx(
        [0.90, 0.05, 0.05])
    assert estimate("internet_paid", internet(90, 5, 5)).point == pytest.approx(90.0)


def test_internet_all_paid():
    sh = internet_shares(internet(12, 0, 0))
    assert (sh["paid"].point, sh["unpaid"].point, sh["none"].point) == (1.0, 0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(counts=st.tuples(*[st.integers(0, 20)] * 4), seed=st.integers(0, 1000))
def test_internet_sums_to_one(counts, seed):
    if sum(counts[:3]) == 0:
        return
    ds = internet(*counts)
    w = np.random.default_rng(seed).uniform(0.1, 5, len(ds))
    total = sum(e.point for e in internet_shares(ds, w).values())
    assert abs(total - 1.0) <= 1e-9


def test_z_constant():
    assert Z95 == 1.96
