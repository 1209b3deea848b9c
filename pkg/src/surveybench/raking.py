"""Calibration weights by iterative proportional fitting (raking).

The national design rakes on race/ethnicity (4), education (5), gender by
age (12) and region (7: the four census regions with CA, FL and WI split
out).  Within a single state the design collapses gender by age to 6 cells
and education to 4, and drops region.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_codes
from .dataset import CATEGORIES, STATES, RespondentRecord, SurveyDataset
from .errors import (
    ConfigError,
    EmptyTargetCell,
    InconsistentTargets,
    InsufficientCells,
    MissingWeightVariable,
    NoConvergenceWarning,
)

SHARE_SUM_TOL = 1e-9

AGE_BRACKETS_12 = ((18, 24), (25, 34), (35, 44), (45, 54), (55, 64), (65, None))
AGE_BRACKETS_6 = ((18, 34), (35, 54), (55, None))


@dataclass(frozen=True)
class Dimension:
    """A weighting variable: its categories and a vectorized categorizer.

    ``categorize`` maps a dataset to an int array of category indices, with
    -1 for records that cannot be placed.
    """

    name: str
    categories: tuple[str, ...]
    categorize: Callable[[SurveyDataset], np.ndarray]

    def category_of(self, record: RespondentRecord) -> str | None:
        code = int(self.categorize(SurveyDataset.from_records([record]))[0])
        return self.categories[code] if code >= 0 else None


@dataclass(frozen=True)
class MarginSpec:
    dimensions: tuple[Dimension, ...]
    level: str = "national"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def __getitem__(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)


def _bracket_label(lo, hi):
    return f"{lo}_plus" if hi is None else f"{lo}_{hi}"


def _gender_age_dimension(name, brackets):
    cats = tuple(
        f"{g}_{_bracket_label(lo, hi)}" for lo, hi in brackets for g in ("male", "female")
    )
    man = CATEGORIES["gender"].index("man")
    woman = CATEGORIES["gender"].index("woman")
    edges = np.array([lo for lo, _ in brackets[1:]])

    def categorize(ds):
        g = ds.codes("gender")
        bracket = np.searchsorted(edges, ds.age(), side="right")
        out = 2 * bracket + (g == woman)
        return np.where((g == man) | (g == woman), out, -1)

    return Dimension(name, cats, categorize)


def _passthrough_dimension(name):
    cats = tuple(c for c in CATEGORIES[name] if c != "missing")
    k = len(cats)

    def categorize(ds):
        c = ds.codes(name).astype(np.intp)
        return np.where(c < k, c, -1)

    return Dimension(name, cats, categorize)


def _collapsed_education():
    cats = ("hs_or_less", "some_college", "ba", "post_ba")
    lut = np.array([0, 0, 1, 2, 3, -1])

    def categorize(ds):
        return lut[ds.codes("education")]

    return Dimension("education", cats, categorize)


def _region7_dimension():
    base = tuple(c for c in CATEGORIES["region"] if c != "missing")
    split = ("CA", "FL", "WI")
    cats = base + split
    state_lut = np.full(len(STATES) + 1, -1)
    for j, st in enumerate(split):
        state_lut[STATES.index(st)] = len(base) + j

    def categorize(ds):
        reg = ds.codes("region").astype(np.intp)
        reg = np.where(reg < len(base), reg, -1)
        over = state_lut[ds.state_codes()]  # state code -1 hits the trailing -1
        return np.where(over >= 0, over, reg)

    return Dimension("region", cats, categorize)


def national_spec() -> MarginSpec:
    return MarginSpec(
        (
            _passthrough_dimension("race_eth"),
            _passthrough_dimension("education"),
            _gender_age_dimension("gender_age", AGE_BRACKETS_12),
            _region7_dimension(),
        ),
        level="national",
    )


def state_spec() -> MarginSpec:
    return MarginSpec(
        (
            _passthrough_dimension("race_eth"),
            _collapsed_education(),
            _gender_age_dimension("gender_age", AGE_BRACKETS_6),
        ),
        level="state",
    )


def get_spec(level: str | MarginSpec) -> MarginSpec:
    if isinstance(level, MarginSpec):
        return level
    if level == "national":
        return national_spec()
    if level == "state":
        return state_spec()
    raise ValueError(f"unknown margin level {level!r}")


# -- targets ------------------------------------------------------------------


@dataclass(frozen=True)
class MarginTargets:
    """Target population share per category, per dimension."""

    shares: Mapping[str, Mapping[str, float]]

    def validate(self, spec: MarginSpec) -> None:
        for dim in spec.dimensions:
            if dim.name not in self.shares:
                raise ConfigError(f"no targets for dimension {dim.name!r}")
            given = self.shares[dim.name]
            missing = [c for c in dim.categories if c not in given]
            extra = [c for c in given if c not in dim.categories]
            if missing or extra:
                raise ConfigError(
                    f"targets for {dim.name!r}: missing {missing}, unknown {extra}"
                )
            vals = np.array([given[c] for c in dim.categories], dtype=float)
            if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
                raise ConfigError(f"targets for {dim.name!r} must lie in [0, 1]")
            if abs(vals.sum() - 1.0) > SHARE_SUM_TOL:
                raise ConfigError(
                    f"targets for {dim.name!r} sum to {vals.sum():.12g}, not 1"
                )

    def arrays(self, spec: MarginSpec) -> list[np.ndarray]:
        self.validate(spec)
        return [
            np.array([self.shares[d.name][c] for c in d.categories], dtype=float)
            for d in spec.dimensions
        ]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Mapping[str, float]],
                     normalize: bool = False) -> "MarginTargets":
        shares = {}
        for dim, table in data.items():
            vals = {str(k): float(v) for k, v in table.items()}
            if normalize:
                tot = sum(vals.values())
                vals = {k: v / tot for k, v in vals.items()}
            shares[str(dim)] = vals
        return cls(shares)

    def to_mapping(self) -> dict[str, dict[str, float]]:
        return {d: dict(t) for d, t in self.shares.items()}


def sample_margins(dataset: SurveyDataset, spec: MarginSpec,
                   weights: np.ndarray | None = None) -> MarginTargets:
    """Weighted category shares of ``dataset`` under ``spec``."""
    a = assign_cells(dataset, spec)
    w = np.ones(a.n) if weights is None else np.asarray(weights, float)
    out = {}
    for j, dim in enumerate(spec.dimensions):
        tot = np.bincount(a.codes[:, j], w, minlength=len(dim.categories))
        out[dim.name] = dict(zip(dim.categories, (tot / tot.sum()).tolist()))
    return MarginTargets(out)


# -- cell assignment ----------------------------------------------------------


@dataclass(frozen=True)
class CellAssignment:
    codes: np.ndarray  # (n, n_dims) category indices
    dimensions: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...]
    respondent_ids: np.ndarray

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    def take(self, positions) -> "CellAssignment":
        positions = np.asarray(positions, dtype=np.intp)
        return CellAssignment(self.codes[positions], self.dimensions,
                              self.categories, self.respondent_ids[positions])

    def counts(self) -> list[np.ndarray]:
        return [
            np.bincount(self.codes[:, j], minlength=len(cats))
            for j, cats in enumerate(self.categories)
        ]


def assign_cells(dataset: SurveyDataset, spec: MarginSpec) -> CellAssignment:
    """Place each respondent in one category per weighting dimension."""
    n = len(dataset)
    codes = np.empty((n, len(spec.dimensions)), dtype=np.intp)
    for j, dim in enumerate(spec.dimensions):
        c = np.asarray(dim.categorize(dataset), dtype=np.intp)
        bad = np.flatnonzero(c < 0)
        if bad.size:
            rid = dataset.record(int(bad[0])).respondent_id
            raise MissingWeightVariable(rid, dim.name)
        codes[:, j] = c
    return CellAssignment(codes, spec.names,
                          tuple(d.categories for d in spec.dimensions),
                          dataset.respondent_ids)


# -- raking -------------------------------------------------------------------


@dataclass(frozen=True)
class RakeConfig:
    tolerance: float = 1e-6
    max_iterations: int = 100
    min_cell_count: int = 5
    max_weight_ratio: float | None = None  # trimming cap relative to the mean; off

    @classmethod
    def from_mapping(cls, cfg: Mapping | None) -> "RakeConfig":
        cfg = dict(cfg or {})
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown rake option(s): {sorted(unknown)}")
        return cls(**cfg)


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    converged: bool
    iterations: int
    max_margin_gap: float
    gap_history: tuple[float, ...] = ()  # gap after each completed pass
    respondent_ids: np.ndarray | None = None
    # per dimension, log of the cumulative adjustment for each category; kept
    # in log space because factors diverge on tables with structural zeros
    log_factors: tuple[np.ndarray, ...] = field(default=(), repr=False)
    log_scale: float = 0.0
    initial_gap: float = 0.0  # gap of unit weights, before any pass

    def __len__(self):
        return len(self.weights)

    @property
    def factors(self) -> tuple[np.ndarray, ...]:
        with np.errstate(over="ignore"):
            return tuple(np.exp(f) for f in self.log_factors)

    def by_respondent(self) -> dict[str, float]:
        return dict(zip(self.respondent_ids, self.weights.tolist()))


def margin_gap(codes: np.ndarray, weights: np.ndarray,
               target_arrays: Sequence[np.ndarray]) -> float:
    """Largest |weighted share - target| over all dimensions and categories."""
    total = weights.sum()
    gap = 0.0
    for j, t in enumerate(target_arrays):
        share = np.bincount(codes[:, j], weights, minlength=len(t)) / total
        gap = max(gap, float(np.max(np.abs(share - t))))
    return gap


def check_cells(assignment: CellAssignment, target_arrays: Sequence[np.ndarray],
                min_cell_count: int) -> None:
    empty, thin, contradictory = [], [], []
    for j, (counts, t) in enumerate(zip(assignment.counts(), target_arrays)):
        name, cats = assignment.dimensions[j], assignment.categories[j]
        for k, (n_k, t_k) in enumerate(zip(counts, t)):
            if t_k > 0 and n_k == 0:
                empty.append((name, cats[k], 0))
            elif t_k > 0 and n_k < min_cell_count:
                thin.append((name, cats[k], int(n_k)))
            elif t_k == 0 and n_k > 0:
                contradictory.append((name, cats[k], int(n_k)))
    if empty:
        raise EmptyTargetCell(empty + thin, min_cell_count)
    if thin:
        raise InsufficientCells(thin, min_cell_count)
    if contradictory:
        desc = ", ".join(f"{d}={c} (n={n})" for d, c, n in contradictory)
        raise InconsistentTargets(f"respondents present in zero-target categories: {desc}")


def rake(assignment: CellAssignment, targets: MarginTargets | Sequence[np.ndarray],
         config: RakeConfig | None = None, spec: MarginSpec | None = None) -> WeightVector:
    """Rake unit weights to ``targets``.

    Dimensions are adjusted in declaration order.  Iteration stops once the
    largest margin gap is at most ``config.tolerance``; if ``max_iterations``
    passes are used up the best-effort weights are returned with
    ``converged=False`` and a :class:`NoConvergenceWarning` is issued.

    Raises
    ------
    EmptyTargetCell
        A category with a positive target has no respondents.
    InsufficientCells
        A category with a positive target has fewer than
        ``config.min_cell_count`` respondents.
    InconsistentTargets
        Respondents sit in a category whose target is zero.
    """
    config = config or RakeConfig()
    if isinstance(targets, MarginTargets):
        if spec is None:
            target_arrays = [
                np.array([targets.shares[name][c] for c in cats], dtype=float)
                for name, cats in zip(assignment.dimensions, assignment.categories)
            ]
        else:
            target_arrays = targets.arrays(spec)
    else:
        target_arrays = [np.asarray(t, dtype=float) for t in targets]
    for t, cats in zip(target_arrays, assignment.categories):
        if t.shape != (len(cats),):
            raise ConfigError("target arrays do not match assignment categories")

    check_cells(assignment, target_arrays, config.min_cell_count)

    codes = assignment.codes
    n = assignment.n
    w = np.ones(n)
    log_factors = [np.zeros(len(t)) for t in target_arrays]
    cap = config.max_weight_ratio

    gap = initial_gap = margin_gap(codes, w, target_arrays)
    history = []
    it = 0
    while gap > config.tolerance and it < config.max_iterations:
        for j, t in enumerate(target_arrays):
            tot = np.bincount(codes[:, j], w, minlength=len(t))
            share = tot / tot.sum()
            adj = np.divide(t, share, out=np.ones_like(t), where=share > 0)
            log_factors[j] += np.log(adj)
            w = w * adj[codes[:, j]]
        if cap is not None:
            w = np.minimum(w, cap * w.mean())
        it += 1
        gap = margin_gap(codes, w, target_arrays)
        history.append(gap)

    scale = float(w.mean())
    w = w / scale
    log_scale = math.log(scale)
    converged = gap <= config.tolerance
    if not converged:
        warnings.warn(
            f"raking stopped after {it} iterations with margin gap {gap:.3g}",
            NoConvergenceWarning,
            stacklevel=2,
        )
    return WeightVector(w, converged, it, gap, tuple(history),
                        assignment.respondent_ids, tuple(log_factors), log_scale,
                        initial_gap)


# -- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class WeightDiagnostics:
    n: int
    design_effect: float
    effective_n: float
    min_weight: float
    max_weight: float


def kish_effective_n(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.dot(w, w))


def diagnose(weights: WeightVector | np.ndarray) -> WeightDiagnostics:
    """Kish design effect (1 + CV^2) and effective sample size."""
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    n = len(w)
    if n == 0:
        raise ValueError("no weights to diagnose")
    cv2 = w.var() / w.mean() ** 2
    deff = 1.0 + cv2
    if np.all(w == w[0]):
        deff = 1.0
    return WeightDiagnostics(n, float(deff), n / deff, float(w.min()), float(w.max()))


# -- estimator API ------------------------------------------------------------


class Raker(BaseEstimator, TransformerMixin):
    """Scikit-learn style raking transformer.

    ``fit`` accepts a :class:`SurveyDataset`, a :class:`CellAssignment`, or
    an integer array of category codes with one column per dimension of
    ``margin_spec``.  After fitting, :meth:`transform` maps any data with
    the same layout to weights by applying the learned per-category
    adjustment factors, so ``fit_transform(X)`` returns the raked weights
    of ``X`` (mean 1) when trimming is off.

    Attributes
    ----------
    weights_ : ndarray of shape (n_samples,)
    converged_ : bool
    n_iter_ : int
    max_margin_gap_ : float
    log_factors_ : list of ndarray
        Log cumulative adjustment per category, one array per dimension.
    diagnostics_ : WeightDiagnostics
    """

    def __init__(self, margin_spec="national", targets=None, tolerance=1e-6,
                 max_iterations=100, min_cell_count=5, max_weight_ratio=None):
        self.margin_spec = margin_spec
        self.targets = targets
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.min_cell_count = min_cell_count
        self.max_weight_ratio = max_weight_ratio

    def _spec(self):
        return get_spec(self.margin_spec)

    def _codes(self, X, spec):
        if isinstance(X, SurveyDataset):
            return assign_cells(X, spec)
        if isinstance(X, CellAssignment):
            return X
        codes = check_codes(X, [len(d.categories) for d in spec.dimensions])
        return CellAssignment(codes, spec.names,
                              tuple(d.categories for d in spec.dimensions),
                              np.arange(len(codes)).astype(str).astype(object))

    def fit(self, X, y=None):
        if self.targets is None:
            raise ValueError("Raker needs margin targets")
        spec = self._spec()
        targets = self.targets
        if not isinstance(targets, MarginTargets):
            targets = MarginTargets.from_mapping(targets)
        cfg = RakeConfig(self.tolerance, self.max_iterations, self.min_cell_count,
                         self.max_weight_ratio)
        result = rake(self._codes(X, spec), targets, cfg, spec=spec)
        self.result_ = result
        self.weights_ = result.weights
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        self.max_margin_gap_ = result.max_margin_gap
        self.log_factors_ = list(result.log_factors)
        self.log_scale_ = result.log_scale
        self.diagnostics_ = diagnose(result.weights)
        return self

    def transform(self, X):
        check_is_fitted(self, "log_factors_")
        a = self._codes(X, self._spec())
        logw = np.full(a.n, -self.log_scale_)
        for j, f in enumerate(self.log_factors_):
            logw += f[a.codes[:, j]]
        return np.exp(logw)
