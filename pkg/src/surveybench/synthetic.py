"""Synthetic populations and biased sampling frames with exact known truths.

A population is generated cell by cell from the national weighting
dimensions; outcomes follow simple logit (probabilities) or log-linear
(birth rates) models with per-category shifts.  Truths are tabulated from
the realized population, never taken from model parameters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.special import expit, logit

from .dataset import (
    BIRTHS_MAX_AGE,
    BIRTHS_TOP_CODE,
    CATEGORIES,
    DEFAULT_FRAMES,
    OVERSAMPLE_STATES,
    STATE_REGION,
    STATES,
    FrameKind,
    SurveyDataset,
    write_survey,
)
from .errors import ConfigError, SizeExceedsPopulation
from .raking import AGE_BRACKETS_12, MarginTargets, national_spec, sample_margins, state_spec

DEFAULT_DEMOGRAPHICS: dict[str, dict[str, float]] = {
    "race_eth": {"white_nh": 0.62, "black_nh": 0.12, "hispanic": 0.17, "other_nh": 0.09},
    "education": {"lt_hs": 0.10, "hs": 0.28, "some_college": 0.28, "ba": 0.21,
                  "post_ba": 0.13},
    "gender_age": {
        "male_18_24": 0.060, "female_18_24": 0.060,
        "male_25_34": 0.085, "female_25_34": 0.085,
        "male_35_44": 0.080, "female_35_44": 0.080,
        "male_45_54": 0.080, "female_45_54": 0.080,
        "male_55_64": 0.080, "female_55_64": 0.085,
        "male_65_plus": 0.105, "female_65_plus": 0.120,
    },
    "region": {"northeast": 0.170, "south": 0.310, "midwest": 0.190, "west": 0.128,
               "CA": 0.118, "FL": 0.066, "WI": 0.018},
}


@dataclass(frozen=True)
class OutcomeModel:
    """``base`` on the probability (or rate) scale, shifts on logit (or log) scale.

    ``effects`` maps a national weighting dimension to {category: shift}.
    """

    base: float
    effects: Mapping[str, Mapping[str, float]] = field(default_factory=dict)


def _default_outcomes() -> dict[str, OutcomeModel]:
    return {
        "vote_rep": OutcomeModel(0.60, {
            "race_eth": {"black_nh": -1.6, "hispanic": -0.5, "other_nh": -0.3},
            "education": {"ba": -0.25, "post_ba": -0.5},
            "gender_age": {"female_18_24": -0.4, "male_18_24": -0.2,
                           "female_25_34": -0.3, "male_65_plus": 0.2},
        }),
        "vote_other": OutcomeModel(0.03),
        "vote_none": OutcomeModel(0.08),
        "births": OutcomeModel(0.8, {
            "gender_age": {"female_18_24": -0.5, "female_25_34": 0.6,
                           "female_35_44": 0.4, "female_45_54": -1.2,
                           "female_55_64": -3.5},
            "race_eth": {"hispanic": 0.15},
        }),
        "internet_none": OutcomeModel(0.06, {
            "gender_age": {"male_65_plus": 0.6, "female_65_plus": 0.6},
            "education": {"lt_hs": 0.5, "ba": -0.5, "post_ba": -0.6},
        }),
        "internet_unpaid": OutcomeModel(0.022),
    }


DEFAULT_TURNOUT = {"will_not_vote": 0.10, "less_than_even": 0.05, "even": 0.07,
                   "probably": 0.13, "certain": 0.40, "already_voted": 0.25}
DEFAULT_INTEREST = {"extremely": 0.30, "very": 0.25, "somewhat": 0.25, "a_little": 0.12,
                    "not_at_all": 0.08}


@dataclass(frozen=True)
class SyntheticPopulationConfig:
    population_size: int = 100_000
    demographics: Mapping[str, Mapping[str, float]] = field(
        default_factory=lambda: DEFAULT_DEMOGRAPHICS)
    outcomes: Mapping[str, OutcomeModel] = field(default_factory=_default_outcomes)
    turnout: Mapping[str, float] = field(default_factory=lambda: DEFAULT_TURNOUT)
    interest: Mapping[str, float] = field(default_factory=lambda: DEFAULT_INTEREST)
    seed: int = 0

    def __post_init__(self):
        spec = national_spec()
        for dim in spec.dimensions:
            dist = self.demographics.get(dim.name)
            if dist is None or set(dist) != set(dim.categories):
                raise ConfigError(f"demographics for {dim.name!r} must list {dim.categories}")
            _check_dist(dist, dim.name)
        _check_dist(self.turnout, "turnout")
        _check_dist(self.interest, "interest")
        for name, model in self.outcomes.items():
            if name == "births":
                if model.base < 0:
                    raise ConfigError("birth rate must be non-negative")
            elif not 0 <= model.base <= 1:
                raise ConfigError(f"outcome {name!r}: probability outside [0, 1]")
        if self.population_size < 1:
            raise ConfigError("population_size must be positive")

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any]) -> "SyntheticPopulationConfig":
        cfg = dict(cfg or {})
        outcomes = _default_outcomes()
        for name, m in (cfg.pop("outcomes", None) or {}).items():
            outcomes[name] = OutcomeModel(float(m["base"]), m.get("effects") or {})
        demo = dict(DEFAULT_DEMOGRAPHICS)
        demo.update(cfg.pop("demographics", None) or {})
        return cls(outcomes=outcomes, demographics=demo, **cfg)


def _check_dist(dist, name):
    v = np.array(list(dist.values()), dtype=float)
    if np.any(v < 0) or abs(v.sum() - 1) > 1e-9:
        raise ConfigError(f"distribution {name!r} must be non-negative and sum to 1")


@dataclass
class TrueValues:
    """Exact tabulations over a realized population (percent / counts)."""

    population_size: int
    two_party_share: float
    births_total: int
    eligible_women: int
    internet_paid: float
    internet_unpaid: float
    internet_none: float
    by_state: dict[str, dict[str, float]]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def benchmark_overlay(self) -> dict[str, dict[str, Any]]:
        """Benchmark overlay entries carrying these truths."""
        out = {
            "house_vote_2022": {"truth": self.two_party_share},
            "house_vote_2022_likely": {"truth": self.two_party_share},
            "births_national": {"truth": self.births_total,
                                "params": {"eligible_population_count": self.eligible_women}},
            "internet_paid": {"truth": self.internet_paid},
            "internet_unpaid": {"truth": self.internet_unpaid},
        }
        for st, t in self.by_state.items():
            out[f"births_{st}"] = {
                "truth": t["births_total"], "units": "count", "estimator": "births_total",
                "scope": st, "params": {"eligible_population_count": t["eligible_women"]},
            }
            out[f"house_vote_{st}"] = {"truth": t["two_party_share"], "units": "percent",
                                       "estimator": "two_party_share", "scope": st}
            out[f"internet_paid_{st}"] = {"truth": t["internet_paid"], "units": "percent",
                                          "estimator": "internet_paid", "scope": st}
        return out


POPULATION_FRAME = FrameKind("population", "probability", national_pool=False)


@dataclass
class Population:
    table: SurveyDataset
    truths: TrueValues
    config: SyntheticPopulationConfig
    # national weighting cell per person, one column per national dimension
    cells: np.ndarray

    def __len__(self):
        return len(self.table)

    def margins(self) -> MarginTargets:
        return sample_margins(self.table, national_spec())

    def state_margins(self, state: str) -> MarginTargets:
        from .dataset import FilterSpec

        return sample_margins(self.table.filter(FilterSpec.where(state=state)), state_spec())


def _shift(model: OutcomeModel, cells: np.ndarray) -> np.ndarray:
    spec = national_spec()
    out = np.zeros(cells.shape[0])
    for j, dim in enumerate(spec.dimensions):
        table = model.effects.get(dim.name) or {}
        if table:
            lut = np.array([float(table.get(c, 0.0)) for c in dim.categories])
            out += lut[cells[:, j]]
    unknown = set(model.effects) - set(spec.names)
    if unknown:
        raise ConfigError(f"effects on unknown dimension(s) {sorted(unknown)}")
    return out


def _prob(model: OutcomeModel, cells: np.ndarray) -> np.ndarray:
    if model.base in (0.0, 1.0):
        return np.full(cells.shape[0], model.base)
    return expit(logit(model.base) + _shift(model, cells))


def generate_population(config: SyntheticPopulationConfig) -> Population:
    rng = np.random.default_rng(config.seed)
    n = config.population_size
    spec = national_spec()
    cells = np.empty((n, len(spec.dimensions)), dtype=np.intp)
    for j, dim in enumerate(spec.dimensions):
        p = np.array([config.demographics[dim.name][c] for c in dim.categories])
        cells[:, j] = rng.choice(len(p), size=n, p=p / p.sum())

    race, edu, ga, reg = cells.T
    gender = np.where(ga % 2 == 1, CATEGORIES["gender"].index("woman"),
                      CATEGORIES["gender"].index("man"))
    bracket = ga // 2
    lo = np.array([b[0] for b in AGE_BRACKETS_12])
    hi = np.array([b[1] if b[1] is not None else 90 for b in AGE_BRACKETS_12])
    age = rng.integers(lo[bracket], hi[bracket] + 1)

    base_regions = [c for c in CATEGORIES["region"] if c != "missing"]
    region_states = {
        r: [STATES.index(s) for s in STATES
            if STATE_REGION[s] == r and s not in OVERSAMPLE_STATES]
        for r in base_regions
    }
    state = np.empty(n, dtype=np.int8)
    region = np.empty(n, dtype=np.int8)
    for k, cat in enumerate(spec["region"].categories):
        idx = np.flatnonzero(reg == k)
        if cat in OVERSAMPLE_STATES:
            state[idx] = STATES.index(cat)
            region[idx] = base_regions.index(STATE_REGION[cat])
        else:
            choices = np.array(region_states[cat])
            state[idx] = choices[rng.integers(0, len(choices), idx.size)]
            region[idx] = base_regions.index(cat)

    out = config.outcomes
    vc = CATEGORIES["vote_house"]
    p_other, p_none = out["vote_other"].base, out["vote_none"].base
    u = rng.random(n)
    rep = rng.random(n) < _prob(out["vote_rep"], cells)
    vote = np.where(rep, vc.index("rep"), vc.index("dem"))
    vote = np.where(u < p_other, vc.index("other"), vote)
    vote = np.where((u >= p_other) & (u < p_other + p_none), vc.index("none"), vote)

    woman = CATEGORIES["gender"].index("woman")
    eligible = (gender == woman) & (age <= BIRTHS_MAX_AGE)
    bm = out["births"]
    rate = bm.base * np.exp(_shift(bm, cells))
    births = np.minimum(rng.poisson(rate), BIRTHS_TOP_CODE)
    births = np.where(eligible, births, 0)

    ic = CATEGORIES["internet"]
    none = rng.random(n) < _prob(out["internet_none"], cells)
    unpaid = rng.random(n) < _prob(out["internet_unpaid"], cells)
    internet = np.where(none, ic.index("none"),
                        np.where(unpaid, ic.index("unpaid"), ic.index("paid")))

    def draw(dist, field_name):
        cats = CATEGORIES[field_name]
        p = np.array([dist[c] for c in cats if c != "missing"])
        return rng.choice(len(p), size=n, p=p / p.sum())

    columns = {
        "respondent_id": np.array([f"p{i:07d}" for i in range(n)], dtype=object),
        "frame": np.zeros(n, dtype=np.int16),
        "age_years": age,
        "state": state,
        "births_10yr": births,
        "births_observed": eligible,
        "mode": np.zeros(n, dtype=np.int8),
        "gender": gender,
        "race_eth": race,
        "education": edu,
        "region": region,
        "vote_house": vote,
        "turnout_intent": draw(config.turnout, "turnout_intent"),
        "interest": draw(config.interest, "interest"),
        "internet": internet,
    }
    table = SurveyDataset.from_columns(columns, [POPULATION_FRAME])
    truths = tabulate_truths(columns, n)
    return Population(table, truths, config, cells)


def tabulate_truths(columns: Mapping[str, np.ndarray], n: int) -> TrueValues:
    """Exact truths by counting over encoded population columns."""
    vc, ic = CATEGORIES["vote_house"], CATEGORIES["internet"]

    def tab(sel):
        vote = columns["vote_house"][sel]
        rep = int(np.count_nonzero(vote == vc.index("rep")))
        dem = int(np.count_nonzero(vote == vc.index("dem")))
        net = columns["internet"][sel]
        answered = int(np.count_nonzero(net != ic.index("missing")))
        births = int(columns["births_10yr"][sel][columns["births_observed"][sel]].sum())
        return {
            "two_party_share": 100.0 * rep / (rep + dem) if rep + dem else float("nan"),
            "births_total": births,
            "eligible_women": int(np.count_nonzero(columns["births_observed"][sel])),
            "internet_paid": 100.0 * np.count_nonzero(net == ic.index("paid")) / answered,
            "internet_unpaid": 100.0 * np.count_nonzero(net == ic.index("unpaid")) / answered,
            "internet_none": 100.0 * np.count_nonzero(net == ic.index("none")) / answered,
        }

    national = tab(np.ones(n, dtype=bool))
    by_state = {st: tab(columns["state"] == STATES.index(st)) for st in OVERSAMPLE_STATES}
    return TrueValues(population_size=n, by_state=by_state, **national)


# -- frames -------------------------------------------------------------------


@dataclass(frozen=True)
class FrameBias:
    """Selection-propensity multipliers for one frame.

    ``demographic`` maps a national weighting dimension to {category: mult};
    ``outcome`` maps a record field (e.g. ``vote_house``) to {value: mult}.
    A person's propensity is the product of applicable multipliers.
    """

    demographic: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    outcome: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for table in list(self.demographic.values()) + list(self.outcome.values()):
            if any(v <= 0 for v in table.values()):
                raise ConfigError("selection propensities must be positive")


@dataclass(frozen=True)
class FrameBiasConfig:
    frames: Mapping[str, FrameBias] = field(default_factory=dict)

    def for_frame(self, label: str) -> FrameBias:
        return self.frames.get(label, FrameBias())

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any] | None) -> "FrameBiasConfig":
        return cls({label: FrameBias(b.get("demographic") or {}, b.get("outcome") or {})
                    for label, b in (cfg or {}).items()})


def propensity(population: Population, bias: FrameBias) -> np.ndarray:
    spec = national_spec()
    p = np.ones(len(population))
    for dim_name, table in bias.demographic.items():
        j = spec.names.index(dim_name)
        lut = np.array([float(table.get(c, 1.0)) for c in spec.dimensions[j].categories])
        p *= lut[population.cells[:, j]]
    for field_name, table in bias.outcome.items():
        cats = CATEGORIES[field_name]
        lut = np.array([float(table.get(c, 1.0)) for c in cats])
        p *= lut[population.table.codes(field_name)]
    return p


def _pps_without_replacement(rng, weights, size):
    # Successive sampling: smallest exponential keys scaled by 1/weight.
    keys = rng.exponential(size=len(weights)) / weights
    if size == len(weights):
        return np.argsort(keys, kind="stable")
    part = np.argpartition(keys, size)[:size]
    return part[np.argsort(keys[part], kind="stable")]


def sample_frames(population: Population, bias: FrameBiasConfig,
                  sizes: Mapping[str, int | Mapping[str, int]], seed: int,
                  frame_kinds: Mapping[str, FrameKind] | None = None) -> SurveyDataset:
    """Draw each frame without replacement, proportional to propensity.

    ``sizes[label]`` is either a total or {state or "other": n}, where
    "other" covers every state not named in that mapping.  Frames are drawn
    independently, so one person may appear in several frames (with a
    distinct ``respondent_id`` per frame).
    """
    kinds = dict(DEFAULT_FRAMES)
    kinds.update(frame_kinds or {})
    rng = np.random.default_rng(seed)
    pop = population.table
    state_codes = pop.state_codes()
    picks, labels = [], []
    frames = []
    for label, size in sizes.items():
        if label not in kinds:
            raise ConfigError(f"unknown frame {label!r}")
        fidx = len(frames)
        frames.append(kinds[label])
        p = propensity(population, bias.for_frame(label))
        strata = size if isinstance(size, Mapping) else {"all": size}
        named = [STATES.index(s) for s in strata if s not in ("all", "other")]
        for stratum, n in strata.items():
            if stratum == "all":
                members = np.arange(len(pop))
            elif stratum == "other":
                members = np.flatnonzero(~np.isin(state_codes, named))
            else:
                members = np.flatnonzero(state_codes == STATES.index(stratum))
            if n > len(members):
                raise SizeExceedsPopulation(
                    f"frame {label!r} stratum {stratum!r}: {n} > {len(members)} people"
                )
            if n == 0:
                continue
            chosen = members[_pps_without_replacement(rng, p[members], n)]
            picks.append(chosen)
            labels.append(np.full(n, fidx))
    if not picks:
        raise ConfigError("no frame sizes given")
    rows = np.concatenate(picks)
    frame_idx = np.concatenate(labels)
    src = pop._store.columns
    cols = {k: src[k][rows] for k in src}
    cols["frame"] = frame_idx
    ids = src["respondent_id"][rows]
    cols["respondent_id"] = np.array(
        [f"{frames[f].source_label}-{pid}" for f, pid in zip(frame_idx, ids)], dtype=object)
    mode_lut = np.array([CATEGORIES["mode"].index(f.default_mode) for f in frames])
    cols["mode"] = mode_lut[frame_idx]
    return SurveyDataset.from_columns(cols, frames)


# Sample sizes by frame and oversample state, as in the CMS methods table.
CMS_FRAME_SIZES: dict[str, dict[str, int]] = {
    "prob_panel": {"CA": 623, "FL": 615, "WI": 331, "other": 1313},
    "random_abs_wi": {"WI": 183},
    "nonprob_panel_1": {"CA": 364, "FL": 301, "WI": 392, "other": 492},
    "nonprob_marketplace_1": {"CA": 253, "FL": 309, "WI": 303, "other": 976},
    "rv_sms": {"CA": 1501, "FL": 1580, "WI": 1478, "other": 1360},
    "rv_abs": {"CA": 150, "FL": 163, "WI": 159, "other": 133},
    "random_abs": {"CA": 86, "FL": 80, "WI": 77, "other": 68},
    "nonprob_marketplace_2": {"CA": 644, "FL": 536, "WI": 319, "other": 2257},
    "nonprob_panel_2": {"CA": 250, "FL": 175, "WI": 37, "other": 2038},
    "rdd": {"CA": 26, "FL": 28, "WI": 15, "other": 205},
}


def cms_shaped_dataset(seed: int = 2022, population_size: int = 250_000,
                       bias: FrameBiasConfig | None = None) -> tuple[Population, SurveyDataset]:
    """A synthetic 19,820-record dataset with the CMS frame-by-state layout."""
    pop = generate_population(SyntheticPopulationConfig(population_size=population_size,
                                                        seed=seed))
    ds = sample_frames(pop, bias or FrameBiasConfig(), CMS_FRAME_SIZES, seed + 1)
    return pop, ds


def write_truths(truths: TrueValues, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truths.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_population(population: Population, path) -> None:
    write_survey(population.table, path)
